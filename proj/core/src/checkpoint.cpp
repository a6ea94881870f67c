#include "divad/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "divad/error.hpp"

namespace divad::nn {
namespace {

constexpr std::array<char, 8> kMagic{'D', 'I', 'V', 'A', 'D', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params,
                     const std::string& spec_json) {
    nlohmann::json header;
    header["spec"] = spec_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(spec_json);
    header["arrays"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto* p : params) {
        header["arrays"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()},
                                    {"offset", offset}});
        offset += static_cast<std::uint64_t>(p->value.size()) * sizeof(double);
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(kMagic.data(), kMagic.size());
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* p : params) {
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * static_cast<Eigen::Index>(sizeof(double))));
    }
    if (!out) throw FormatError("short write on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw FormatError(path.string() + ": not a checkpoint archive");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError(path.string() + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    Checkpoint ck;
    ck.spec_json = header.at("spec").dump();
    const auto data_start = in.tellg();
    for (const auto& entry : header.at("arrays")) {
        NamedArray a;
        a.name = entry.at("name").get<std::string>();
        a.value.resize(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
        in.seekg(data_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        in.read(reinterpret_cast<char*>(a.value.data()),
                static_cast<std::streamsize>(a.value.size() * static_cast<Eigen::Index>(sizeof(double))));
        if (!in) throw FormatError(path.string() + ": truncated array '" + a.name + "'");
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

void restore_parameters(const Checkpoint& checkpoint, const std::vector<Parameter*>& params) {
    std::unordered_map<std::string, const Matrix*> by_name;
    for (const auto& a : checkpoint.arrays) by_name.emplace(a.name, &a.value);
    for (auto* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw FormatError("checkpoint lacks parameter '" + p->name + "'");
        if (it->second->rows() != p->value.rows() || it->second->cols() != p->value.cols()) {
            throw DimensionError("checkpoint shape mismatch for '" + p->name + "'");
        }
        p->value = *it->second;
        p->zero_grad();
    }
}

std::vector<Matrix> snapshot(const std::vector<Parameter*>& params) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

void restore(const std::vector<Matrix>& values, const std::vector<Parameter*>& params) {
    if (values.size() != params.size()) throw StateError("snapshot size differs from parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace divad::nn
