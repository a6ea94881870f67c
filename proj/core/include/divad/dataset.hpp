#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace divad::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Role { Train, Test };

std::string to_string(Role role);
Role role_from_string(const std::string& text);

/// Label value of a normal record. Positive values are event types.
inline constexpr int kNormalLabel = 0;

/// One trace: T records of M features, recorded under a single domain.
struct Sequence {
    std::string id;
    int domain_id = 0;
    Matrix values;                      // T x M
    std::vector<int> labels;            // empty when unlabeled, else length T
    std::vector<std::int64_t> timestamps;  // empty means 0..T-1
    Role role = Role::Train;

    [[nodiscard]] Eigen::Index length() const { return values.rows(); }
    [[nodiscard]] Eigen::Index n_features() const { return values.cols(); }
    [[nodiscard]] bool has_labels() const { return !labels.empty(); }
    [[nodiscard]] std::int64_t timestamp(Eigen::Index t) const {
        return timestamps.empty() ? static_cast<std::int64_t>(t) : timestamps[static_cast<std::size_t>(t)];
    }
    [[nodiscard]] bool has_anomalies() const;

    /// Throws when the sequence violates its invariants.
    void validate() const;
};

/// A collection of sequences sharing the same feature count.
struct Dataset {
    std::vector<Sequence> sequences;

    [[nodiscard]] Eigen::Index n_features() const;
    [[nodiscard]] std::vector<const Sequence*> with_role(Role role) const;
    [[nodiscard]] std::vector<int> domains(Role role) const;
    void validate() const;
};

/// Sliding windows of length L, immutable once built.
class WindowSet {
public:
    WindowSet() = default;
    WindowSet(Eigen::Index window_length, Eigen::Index n_features);

    /// Appends one window; throws DimensionError on shape mismatch.
    void push_back(Matrix window, int domain_id, std::string sequence_id, Eigen::Index end_timestamp);

    [[nodiscard]] std::size_t size() const { return windows_.size(); }
    [[nodiscard]] bool empty() const { return windows_.empty(); }
    [[nodiscard]] Eigen::Index window_length() const { return window_length_; }
    [[nodiscard]] Eigen::Index n_features() const { return n_features_; }

    [[nodiscard]] const Matrix& window(std::size_t i) const { return windows_[i]; }
    [[nodiscard]] const std::vector<Matrix>& windows() const { return windows_; }
    [[nodiscard]] const std::vector<int>& domain_ids() const { return domain_ids_; }
    [[nodiscard]] const std::vector<std::string>& sequence_ids() const { return sequence_ids_; }
    [[nodiscard]] const std::vector<Eigen::Index>& end_timestamps() const { return end_timestamps_; }

    /// Row i holds window i flattened record by record (length L*M).
    [[nodiscard]] Matrix flattened() const;
    [[nodiscard]] Matrix flattened(std::span<const std::size_t> indices) const;

    [[nodiscard]] WindowSet subset(std::span<const std::size_t> indices) const;
    /// Concatenates two window sets with identical shapes.
    [[nodiscard]] static WindowSet concat(const WindowSet& a, const WindowSet& b);

private:
    Eigen::Index window_length_ = 0;
    Eigen::Index n_features_ = 0;
    std::vector<Matrix> windows_;
    std::vector<int> domain_ids_;
    std::vector<std::string> sequence_ids_;
    std::vector<Eigen::Index> end_timestamps_;
};

/// All T-L+1 windows of `sequence`, the i-th ending at record i+L-1.
WindowSet extract_windows(const Sequence& sequence, Eigen::Index window_length);

/// Windows of several sequences, concatenated in order.
WindowSet extract_windows(std::span<const Sequence* const> sequences, Eigen::Index window_length);

/// Resamples windows so every domain is equally represented while keeping the
/// total count. Over-represented domains are undersampled without replacement,
/// under-represented ones oversampled with replacement.
WindowSet balance_by_domain(const WindowSet& windows, std::uint64_t seed);

/// Per-feature standardization with a floor on the standard deviation.
class Standardizer {
public:
    static constexpr double kDefaultFloor = 1e-8;

    Standardizer() = default;
    Standardizer(Vector mean, Vector stddev, double floor = kDefaultFloor);

    /// Statistics over every record of every window.
    static Standardizer fit(const WindowSet& train, double floor = kDefaultFloor);
    static Standardizer fit(const Matrix& records, double floor = kDefaultFloor);

    [[nodiscard]] WindowSet apply(const WindowSet& windows) const;
    [[nodiscard]] Matrix apply(const Matrix& records) const;
    [[nodiscard]] Sequence apply(const Sequence& sequence) const;
    [[nodiscard]] Matrix inverse(const Matrix& records) const;

    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] const Vector& stddev() const { return stddev_; }
    [[nodiscard]] double floor() const { return floor_; }
    [[nodiscard]] bool fitted() const { return mean_.size() > 0; }

private:
    Vector mean_;
    Vector stddev_;
    double floor_ = kDefaultFloor;
};

/// Stratified (by sequence id) train/validation split. Sequences contributing
/// fewer than two windows stay entirely in training.
std::pair<WindowSet, WindowSet> train_val_split(const WindowSet& windows, double fraction, std::uint64_t seed);

/// Index-level variant of `train_val_split`: returns (train indices, validation indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_val_split_indices(
    const WindowSet& windows, double fraction, std::uint64_t seed);

/// Like `extract_windows`, but skips every window containing a labeled
/// anomalous record. Unlabeled sequences yield all their windows. Returns an
/// empty set (no error) when no clean window exists.
WindowSet extract_normal_windows(const Sequence& sequence, Eigen::Index window_length);

}  // namespace divad::data
