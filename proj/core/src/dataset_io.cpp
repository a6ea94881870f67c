#include "divad/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "divad/error.hpp"
#include "divad/format.hpp"

namespace divad::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view text, const fs::path& path, std::size_t line_no) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(text) + "'");
    }
    return value;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
}

}  // namespace

Trace read_trace_csv(const fs::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty trace file");
    const auto header = split_csv_line(trim(line));
    if (header.empty() || trim(header[0]) != "timestamp") {
        throw FormatError(path.string() + ": header must start with 'timestamp'");
    }
    const auto m = static_cast<Eigen::Index>(header.size() - 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (trim(header[static_cast<std::size_t>(j + 1)]) != "f" + std::to_string(j)) {
            throw FormatError(path.string() + ": expected column f" + std::to_string(j));
        }
    }

    Trace trace;
    std::vector<double> flat;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto cells = split_csv_line(body);
        if (static_cast<Eigen::Index>(cells.size()) != m + 1) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(m + 1) +
                              " columns");
        }
        const auto ts = parse_number<std::int64_t>(cells[0], path, line_no);
        if (!trace.timestamps.empty() && ts <= trace.timestamps.back()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": timestamps must strictly increase");
        }
        trace.timestamps.push_back(ts);
        for (std::size_t j = 1; j < cells.size(); ++j) flat.push_back(parse_number<double>(cells[j], path, line_no));
    }
    const auto T = static_cast<Eigen::Index>(trace.timestamps.size());
    trace.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), T, m);
    return trace;
}

void write_trace_csv(const fs::path& path, const Sequence& sequence) {
    auto out = open_output(path);
    out << "timestamp";
    for (Eigen::Index j = 0; j < sequence.n_features(); ++j) out << ",f" << j;
    out << '\n';
    for (Eigen::Index t = 0; t < sequence.length(); ++t) {
        out << sequence.timestamp(t);
        for (Eigen::Index j = 0; j < sequence.n_features(); ++j) out << ',' << format_double(sequence.values(t, j));
        out << '\n';
    }
}

std::vector<LabelRange> read_labels_csv(const fs::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "sequence_id,start,end,event_type") {
        throw FormatError(path.string() + ": header must be 'sequence_id,start,end,event_type'");
    }
    std::vector<LabelRange> ranges;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto cells = split_csv_line(body);
        if (cells.size() != 4) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
        LabelRange r;
        r.sequence_id = std::string(trim(cells[0]));
        r.start = parse_number<Eigen::Index>(cells[1], path, line_no);
        r.end = parse_number<Eigen::Index>(cells[2], path, line_no);
        r.event_type = parse_number<int>(cells[3], path, line_no);
        if (r.end < r.start || r.start < 0) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid range");
        }
        if (r.event_type <= 0) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": event type must be positive");
        }
        ranges.push_back(std::move(r));
    }
    return ranges;
}

void write_labels_csv(const fs::path& path, const std::vector<LabelRange>& ranges) {
    auto out = open_output(path);
    out << "sequence_id,start,end,event_type\n";
    for (const auto& r : ranges) out << r.sequence_id << ',' << r.start << ',' << r.end << ',' << r.event_type << '\n';
}

std::vector<LabelRange> label_ranges(const Sequence& sequence) {
    std::vector<LabelRange> out;
    if (!sequence.has_labels()) return out;
    const auto T = static_cast<Eigen::Index>(sequence.labels.size());
    for (Eigen::Index t = 0; t < T;) {
        const int l = sequence.labels[static_cast<std::size_t>(t)];
        if (l == kNormalLabel) {
            ++t;
            continue;
        }
        Eigen::Index e = t;
        while (e + 1 < T && sequence.labels[static_cast<std::size_t>(e + 1)] == l) ++e;
        out.push_back({sequence.id, t, e, l});
        t = e + 1;
    }
    return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    auto in = open_input(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    std::vector<ManifestEntry> entries;
    try {
        for (const auto& item : doc.at("sequences")) {
            ManifestEntry e;
            e.id = item.at("id").get<std::string>();
            e.path = item.at("path").get<std::string>();
            e.domain_id = item.at("domain_id").get<int>();
            e.role = role_from_string(item.at("role").get<std::string>());
            if (item.contains("label_path")) e.label_path = item.at("label_path").get<std::string>();
            entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    json doc;
    doc["sequences"] = json::array();
    for (const auto& e : entries) {
        json item{{"id", e.id}, {"path", e.path}, {"domain_id", e.domain_id}, {"role", to_string(e.role)}};
        if (!e.label_path.empty()) item["label_path"] = e.label_path;
        doc["sequences"].push_back(std::move(item));
    }
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& manifest_path) {
    const auto base = manifest_path.parent_path();
    const auto entries = read_manifest(manifest_path);
    std::map<fs::path, std::vector<LabelRange>> label_cache;

    Dataset dataset;
    for (const auto& e : entries) {
        const auto trace = read_trace_csv(resolve(base, e.path));
        Sequence s;
        s.id = e.id;
        s.domain_id = e.domain_id;
        s.role = e.role;
        s.values = trace.values;
        s.timestamps = trace.timestamps;
        if (!e.label_path.empty()) {
            const auto lp = resolve(base, e.label_path);
            auto it = label_cache.find(lp);
            if (it == label_cache.end()) it = label_cache.emplace(lp, read_labels_csv(lp)).first;
            s.labels.assign(static_cast<std::size_t>(s.length()), kNormalLabel);
            for (const auto& r : it->second) {
                if (r.sequence_id != s.id) continue;
                if (r.end >= s.length()) {
                    throw FormatError(lp.string() + ": range " + std::to_string(r.start) + ".." + std::to_string(r.end) +
                                      " exceeds sequence '" + s.id + "'");
                }
                for (auto t = r.start; t <= r.end; ++t) s.labels[static_cast<std::size_t>(t)] = r.event_type;
            }
        }
        dataset.sequences.push_back(std::move(s));
    }
    dataset.validate();
    return dataset;
}

fs::path save_dataset(const fs::path& directory, const Dataset& dataset) {
    fs::create_directories(directory);
    std::vector<ManifestEntry> entries;
    std::vector<LabelRange> ranges;
    bool any_labels = false;
    for (const auto& s : dataset.sequences) {
        ManifestEntry e;
        e.id = s.id;
        e.path = s.id + ".csv";
        e.domain_id = s.domain_id;
        e.role = s.role;
        write_trace_csv(directory / e.path, s);
        if (s.has_labels()) {
            any_labels = true;
            e.label_path = "labels.csv";
            auto r = label_ranges(s);
            ranges.insert(ranges.end(), r.begin(), r.end());
        }
        entries.push_back(std::move(e));
    }
    if (any_labels) write_labels_csv(directory / "labels.csv", ranges);
    const auto manifest = directory / "manifest.json";
    write_manifest(manifest, entries);
    return manifest;
}

}  // namespace divad::data
