#include "divad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "divad/error.hpp"

namespace divad::data {

std::string to_string(Role role) { return role == Role::Train ? "train" : "test"; }

Role role_from_string(const std::string& text) {
    if (text == "train") return Role::Train;
    if (text == "test") return Role::Test;
    throw FormatError("unknown sequence role '" + text + "' (expected train or test)");
}

bool Sequence::has_anomalies() const {
    return std::any_of(labels.begin(), labels.end(), [](int l) { return l != kNormalLabel; });
}

void Sequence::validate() const {
    if (values.rows() < 1) throw EmptyInputError("sequence '" + id + "' has no records");
    if (domain_id < 0) throw ArgumentError("sequence '" + id + "' has a negative domain id");
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != values.rows()) {
        throw DimensionError("sequence '" + id + "': " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(values.rows()) + " records");
    }
    if (!timestamps.empty()) {
        if (static_cast<Eigen::Index>(timestamps.size()) != values.rows()) {
            throw DimensionError("sequence '" + id + "': timestamp count differs from record count");
        }
        for (std::size_t i = 1; i < timestamps.size(); ++i) {
            if (timestamps[i] <= timestamps[i - 1]) {
                throw FormatError("sequence '" + id + "': timestamps not strictly increasing at row " +
                                  std::to_string(i));
            }
        }
    }
}

Eigen::Index Dataset::n_features() const {
    return sequences.empty() ? 0 : sequences.front().n_features();
}

std::vector<const Sequence*> Dataset::with_role(Role role) const {
    std::vector<const Sequence*> out;
    for (const auto& s : sequences) {
        if (s.role == role) out.push_back(&s);
    }
    return out;
}

std::vector<int> Dataset::domains(Role role) const {
    std::set<int> ids;
    for (const auto& s : sequences) {
        if (s.role == role) ids.insert(s.domain_id);
    }
    return {ids.begin(), ids.end()};
}

void Dataset::validate() const {
    if (sequences.empty()) throw EmptyInputError("dataset has no sequences");
    const auto m = n_features();
    std::set<std::string> seen;
    for (const auto& s : sequences) {
        s.validate();
        if (s.n_features() != m) {
            throw DimensionError("sequence '" + s.id + "' has " + std::to_string(s.n_features()) +
                                 " features, expected " + std::to_string(m));
        }
        if (!seen.insert(s.id).second) throw FormatError("duplicate sequence id '" + s.id + "'");
    }
}

// WindowSet

WindowSet::WindowSet(Eigen::Index window_length, Eigen::Index n_features)
    : window_length_(window_length), n_features_(n_features) {
    if (window_length < 1) throw ArgumentError("window length must be positive");
}

void WindowSet::push_back(Matrix window, int domain_id, std::string sequence_id, Eigen::Index end_timestamp) {
    if (window.rows() != window_length_ || window.cols() != n_features_) {
        throw DimensionError("window shape " + std::to_string(window.rows()) + "x" + std::to_string(window.cols()) +
                             " does not match " + std::to_string(window_length_) + "x" +
                             std::to_string(n_features_));
    }
    if (end_timestamp < window_length_ - 1) {
        throw ArgumentError("window end " + std::to_string(end_timestamp) + " precedes L-1");
    }
    windows_.push_back(std::move(window));
    domain_ids_.push_back(domain_id);
    sequence_ids_.push_back(std::move(sequence_id));
    end_timestamps_.push_back(end_timestamp);
}

Matrix WindowSet::flattened() const {
    std::vector<std::size_t> all(size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return flattened(all);
}

Matrix WindowSet::flattened(std::span<const std::size_t> indices) const {
    Matrix out(static_cast<Eigen::Index>(indices.size()), window_length_ * n_features_);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const Matrix& w = windows_[indices[static_cast<std::size_t>(r)]];
        for (Eigen::Index t = 0; t < window_length_; ++t) {
            out.row(r).segment(t * n_features_, n_features_) = w.row(t);
        }
    }
    return out;
}

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
    WindowSet out(window_length_, n_features_);
    for (auto i : indices) {
        out.windows_.push_back(windows_.at(i));
        out.domain_ids_.push_back(domain_ids_[i]);
        out.sequence_ids_.push_back(sequence_ids_[i]);
        out.end_timestamps_.push_back(end_timestamps_[i]);
    }
    return out;
}

WindowSet WindowSet::concat(const WindowSet& a, const WindowSet& b) {
    if (a.empty() && a.window_length_ == 0) return b;
    if (b.empty() && b.window_length_ == 0) return a;
    if (a.window_length_ != b.window_length_ || a.n_features_ != b.n_features_) {
        throw DimensionError("cannot concatenate window sets of different shapes");
    }
    WindowSet out = a;
    out.windows_.insert(out.windows_.end(), b.windows_.begin(), b.windows_.end());
    out.domain_ids_.insert(out.domain_ids_.end(), b.domain_ids_.begin(), b.domain_ids_.end());
    out.sequence_ids_.insert(out.sequence_ids_.end(), b.sequence_ids_.begin(), b.sequence_ids_.end());
    out.end_timestamps_.insert(out.end_timestamps_.end(), b.end_timestamps_.begin(), b.end_timestamps_.end());
    return out;
}

// Windowing

WindowSet extract_windows(const Sequence& sequence, Eigen::Index window_length) {
    if (window_length < 1) throw ArgumentError("window length must be positive");
    const auto T = sequence.length();
    if (window_length > T) {
        throw EmptyInputError("sequence '" + sequence.id + "' has " + std::to_string(T) +
                              " records, fewer than window length " + std::to_string(window_length));
    }
    WindowSet out(window_length, sequence.n_features());
    for (Eigen::Index end = window_length - 1; end < T; ++end) {
        out.push_back(sequence.values.middleRows(end - window_length + 1, window_length), sequence.domain_id,
                      sequence.id, end);
    }
    return out;
}

WindowSet extract_windows(std::span<const Sequence* const> sequences, Eigen::Index window_length) {
    if (sequences.empty()) throw EmptyInputError("no sequences to window");
    WindowSet out(window_length, sequences.front()->n_features());
    for (const Sequence* s : sequences) out = WindowSet::concat(out, extract_windows(*s, window_length));
    return out;
}

WindowSet extract_normal_windows(const Sequence& sequence, Eigen::Index window_length) {
    if (window_length < 1) throw ArgumentError("window length must be positive");
    WindowSet out(window_length, sequence.n_features());
    const auto T = sequence.length();
    Eigen::Index clean_run = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const bool normal = !sequence.has_labels() || sequence.labels[static_cast<std::size_t>(t)] == kNormalLabel;
        clean_run = normal ? clean_run + 1 : 0;
        if (clean_run >= window_length) {
            out.push_back(sequence.values.middleRows(t - window_length + 1, window_length), sequence.domain_id,
                          sequence.id, t);
        }
    }
    return out;
}

// Balancing

WindowSet balance_by_domain(const WindowSet& windows, std::uint64_t seed) {
    if (windows.empty()) throw EmptyInputError("cannot balance an empty window set");
    std::map<int, std::vector<std::size_t>> by_domain;
    for (std::size_t i = 0; i < windows.size(); ++i) by_domain[windows.domain_ids()[i]].push_back(i);

    const std::size_t n_domains = by_domain.size();
    const std::size_t base = windows.size() / n_domains;
    std::size_t remainder = windows.size() % n_domains;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> picked;
    picked.reserve(windows.size());
    for (auto& [domain, members] : by_domain) {
        const std::size_t target = base + (remainder > 0 ? 1 : 0);
        if (remainder > 0) --remainder;
        if (members.size() >= target) {
            std::shuffle(members.begin(), members.end(), rng);
            std::vector<std::size_t> kept(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(target));
            std::sort(kept.begin(), kept.end());
            picked.insert(picked.end(), kept.begin(), kept.end());
        } else {
            picked.insert(picked.end(), members.begin(), members.end());
            std::uniform_int_distribution<std::size_t> draw(0, members.size() - 1);
            for (std::size_t k = members.size(); k < target; ++k) picked.push_back(members[draw(rng)]);
        }
    }
    return windows.subset(picked);
}

// Standardization

Standardizer::Standardizer(Vector mean, Vector stddev, double floor)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), floor_(floor) {
    if (floor_ <= 0.0) throw ArgumentError("standardizer floor must be positive");
    if (mean_.size() != stddev_.size()) throw DimensionError("standardizer mean/std length mismatch");
    stddev_ = stddev_.cwiseMax(floor_);
}

Standardizer Standardizer::fit(const Matrix& records, double floor) {
    if (records.rows() == 0) throw EmptyInputError("cannot fit a standardizer on zero records");
    Vector mean = records.colwise().mean().transpose();
    Vector var = (records.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
    return Standardizer(mean, var.array().sqrt().matrix(), floor);
}

Standardizer Standardizer::fit(const WindowSet& train, double floor) {
    if (train.empty()) throw EmptyInputError("cannot fit a standardizer on an empty window set");
    const Eigen::Index L = train.window_length();
    Matrix records(static_cast<Eigen::Index>(train.size()) * L, train.n_features());
    for (std::size_t i = 0; i < train.size(); ++i) {
        records.middleRows(static_cast<Eigen::Index>(i) * L, L) = train.window(i);
    }
    return fit(records, floor);
}

Matrix Standardizer::apply(const Matrix& records) const {
    if (!fitted()) throw StateError("standardizer used before fit");
    if (records.cols() != mean_.size()) {
        throw DimensionError("standardizer expects " + std::to_string(mean_.size()) + " features, got " +
                             std::to_string(records.cols()));
    }
    return ((records.rowwise() - mean_.transpose()).array().rowwise() / stddev_.transpose().array()).matrix();
}

Matrix Standardizer::inverse(const Matrix& records) const {
    if (!fitted()) throw StateError("standardizer used before fit");
    return ((records.array().rowwise() * stddev_.transpose().array()).rowwise() + mean_.transpose().array())
        .matrix();
}

WindowSet Standardizer::apply(const WindowSet& windows) const {
    WindowSet out(windows.window_length(), windows.n_features());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        out.push_back(apply(windows.window(i)), windows.domain_ids()[i], windows.sequence_ids()[i],
                      windows.end_timestamps()[i]);
    }
    return out;
}

Sequence Standardizer::apply(const Sequence& sequence) const {
    Sequence out = sequence;
    out.values = apply(sequence.values);
    return out;
}

// Splitting

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split_indices(const WindowSet& windows,
                                                                                      double fraction,
                                                                                      std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("validation fraction must lie in (0, 1)");
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& sid = windows.sequence_ids()[i];
        auto [it, inserted] = groups.try_emplace(sid);
        if (inserted) order.push_back(sid);
        it->second.push_back(i);
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    for (const auto& sid : order) {
        auto members = groups[sid];
        if (members.size() < 2) {
            warn("sequence '" + sid + "' contributes fewer than 2 windows; all kept for training");
            train.insert(train.end(), members.begin(), members.end());
            continue;
        }
        const auto n_val = static_cast<std::size_t>(
            std::max(0L, std::lround(fraction * static_cast<double>(members.size()))));
        std::shuffle(members.begin(), members.end(), rng);
        val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {std::move(train), std::move(val)};
}

std::pair<WindowSet, WindowSet> train_val_split(const WindowSet& windows, double fraction, std::uint64_t seed) {
    auto [train, val] = train_val_split_indices(windows, fraction, seed);
    return {windows.subset(train), windows.subset(val)};
}

}  // namespace divad::data
