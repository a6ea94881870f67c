#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "divad/dataset.hpp"

namespace divad::data {

/// One labeled anomalous range, inclusive on both ends (record indices).
struct LabelRange {
    std::string sequence_id;
    Eigen::Index start = 0;
    Eigen::Index end = 0;
    int event_type = 1;
};

/// Manifest entry; paths are relative to the manifest's directory when not absolute.
struct ManifestEntry {
    std::string id;
    std::string path;
    int domain_id = 0;
    Role role = Role::Train;
    std::string label_path;  // optional
};

/// Trace CSV: header `timestamp,f0,...,f{M-1}`.
struct Trace {
    std::vector<std::int64_t> timestamps;
    Matrix values;
};

Trace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const Sequence& sequence);

std::vector<LabelRange> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabelRange>& ranges);

/// Maximal runs of equal nonzero labels.
std::vector<LabelRange> label_ranges(const Sequence& sequence);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Loads every sequence listed in a manifest, attaching labels when present.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `dataset` under `directory`: one trace CSV per sequence, a shared
/// `labels.csv` for labeled sequences and `manifest.json`. Returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& directory, const Dataset& dataset);

}  // namespace divad::data
