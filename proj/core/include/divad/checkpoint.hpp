#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "divad/autodiff.hpp"

namespace divad::nn {

struct NamedArray {
    std::string name;
    Matrix value;
};

/// Contents of a parameter archive: named arrays plus the JSON text of the
/// spec that produced them.
struct Checkpoint {
    std::string spec_json;
    std::vector<NamedArray> arrays;
};

/// Archive layout: 8-byte magic `DIVADCK1`, little-endian u64 header length,
/// JSON header (`spec`, `arrays` index), then the raw column-major doubles.
void save_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params,
                     const std::string& spec_json);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies archived values into parameters matched by name; throws on a
/// missing name or shape mismatch.
void restore_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params);

/// Snapshot / restore of parameter values held in memory (early-stopping checkpoints).
std::vector<Matrix> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Matrix>& values, const std::vector<Parameter*>& params);

}  // namespace divad::nn
