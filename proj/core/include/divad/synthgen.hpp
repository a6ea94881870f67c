#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "divad/dataset.hpp"

namespace divad::synth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Event-type codes written to label files.
enum class AnomalyType { Contextual = 1, Point = 2, Collective = 3 };

std::string to_string(AnomalyType t);
AnomalyType anomaly_type_from_string(const std::string& text);

struct AnomalySpec {
    AnomalyType type = AnomalyType::Point;
    int count = 1;
    Eigen::Index min_duration = 10;
    Eigen::Index max_duration = 40;
    /// Latent displacement, in latent standard deviations.
    double magnitude = 6.0;
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

/// Every domain sees the same latent process h_t (AR(1), stationary N(0, I)).
/// The first `m_invariant` features are A h_t + noise in every domain; the
/// others are offset + scale * (B h_t) + amplitude * sin(2 pi f t + phase) +
/// noise with per-domain parameters. Held-out domains take offsets beyond the
/// training range of every domain-specific feature and a frequency above the
/// training range. Anomalies are injected into held-out sequences only.
struct SynthConfig {
    int n_train_domains = 6;
    int n_test_domains = 2;
    Eigen::Index length = 2000;
    Eigen::Index n_features = 12;
    Eigen::Index m_invariant = 4;
    Eigen::Index latent_dim = 2;
    double ar_coefficient = 0.9;
    double noise_std = 0.1;
    Range offset{-3.0, 3.0};
    Range scale{0.5, 1.5};
    Range frequency{0.002, 0.01};
    Range amplitude{0.2, 1.0};
    /// Held-out offsets lie this far (times U[0.5, 1]) outside the training range.
    double test_shift = 0.5;
    std::vector<AnomalySpec> anomalies{
        {AnomalyType::Contextual, 3, 10, 40, 6.0},
        {AnomalyType::Point, 3, 10, 40, 6.0},
        {AnomalyType::Collective, 2, 10, 40, 6.0},
    };
    std::uint64_t seed = 0;

    /// Throws ConfigError on infeasible settings (no anomalies, a duration
    /// longer than the sequence, too many anomalies to place, ...).
    void validate() const;
    [[nodiscard]] int anomalies_per_sequence() const;
    [[nodiscard]] std::string to_json() const;
    static SynthConfig from_json(const std::string& text);
};

/// Domain parameters actually drawn, kept for inspection.
struct DomainParams {
    int domain_id = 0;
    bool held_out = false;
    Vector offset;  // per domain-specific feature
    Vector scale;
    Vector amplitude;
    Vector phase;
    double frequency = 0.0;
};

struct Injected {
    std::string sequence_id;
    AnomalyType type = AnomalyType::Point;
    Eigen::Index start = 0;
    Eigen::Index end = 0;  // inclusive
    Eigen::Index feature = -1;  // contextual: shifted domain-specific feature
    double level = 0.0;         // contextual: level imposed on that feature
};

struct Generated {
    data::Dataset dataset;
    std::vector<DomainParams> domains;
    std::vector<Injected> anomalies;
};

Generated generate(const SynthConfig& config);

struct DomainSummary {
    int domain_id = 0;
    data::Role role = data::Role::Train;
    Vector feature_min;
    Vector feature_max;
    Vector feature_mean;
};

struct DatasetSummary {
    std::vector<DomainSummary> domains;
    std::vector<int> held_out_domains;
    std::map<int, int> anomaly_counts;  // event type -> number of labeled ranges
    Vector shift_magnitude;             // |mean over train domains - mean over test domains| per feature
    [[nodiscard]] std::string to_json() const;
};

/// Statistics over normal records, per domain and overall.
DatasetSummary describe(const data::Dataset& dataset);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);
/// Asymptotic critical value at level 0.01: 1.628 * sqrt((n + m) / (n m)).
double ks_critical_value_1pct(std::size_t n, std::size_t m);

struct ValidityReport {
    double max_invariant_ks = 0.0;       // over domain pairs and invariant features
    double min_specific_ks = 0.0;        // over domain pairs, max over specific features
    double ks_critical = 0.0;
    std::size_t anomalies = 0;
    std::size_t surviving_anomalies = 0;  // with a record outside the 99.9% invariant ellipsoid
    [[nodiscard]] bool passed() const {
        return max_invariant_ks < ks_critical && min_specific_ks > ks_critical && surviving_anomalies == anomalies;
    }
};

/// Checks the generator's distributional guarantees on a generated dataset.
ValidityReport check_validity(const data::Dataset& dataset, Eigen::Index m_invariant);

}  // namespace divad::synth
