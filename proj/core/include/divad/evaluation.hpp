#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace divad::eval {

/// true at records excluded from counting: the L-1 normal records following
/// each maximal anomalous run. Anomalous records are never masked.
std::vector<bool> mask_post_anomaly(const std::vector<int>& labels, Eigen::Index window_length);

/// Record scores and labels of one test sequence (equal lengths).
struct LabeledScores {
    std::vector<double> scores;
    std::vector<int> labels;
};

/// One detector "score > threshold". `type_recalls` follows PrCurve::event_types.
struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;  // averaged over event types
    double f1 = 0.0;
    std::vector<double> type_recalls;
};

/// Points sorted by increasing threshold. Candidate thresholds are the
/// distinct finite unmasked scores plus -inf, the all-positive detector.
/// Precision is pooled over records and equals 1 with no positive
/// prediction; recall is averaged over the event types present.
struct PrCurve {
    std::vector<PrPoint> points;
    std::vector<int> event_types;
    std::size_t masked_count = 0;
    std::size_t n_records = 0;  // unmasked
};

/// Throws ArgumentError when the unmasked records lack either class, or when
/// an unmasked score is NaN.
PrCurve pr_curve(const std::vector<LabeledScores>& sequences, Eigen::Index window_length);

struct PeakF1 {
    double f1 = 0.0;
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::map<int, double> type_recalls;
};

/// Highest F1 on the curve; ties go to the larger threshold.
PeakF1 peak_f1(const PrCurve& curve);

struct EvaluationReport {
    PrCurve curve;
    PeakF1 peak;
};

EvaluationReport evaluate(const std::vector<LabeledScores>& sequences, Eigen::Index window_length);

// Score distributions.

struct Population {
    std::string name;
    std::vector<double> scores;
};

struct KdeCurve {
    std::string name;
    double bandwidth = 0.0;
    std::vector<double> density;  // over ScoreDistributions::grid
};

struct ScoreDistributions {
    std::vector<Population> populations;
    std::vector<double> grid;
    std::vector<KdeCurve> kde;
    /// Fraction of test-normal scores above the median test-anomalous score.
    double normal_anomalous_overlap = 0.0;
    /// Fraction of test-normal scores above the median train-normal score.
    double train_test_overlap = 0.0;
};

/// Fraction of `population` strictly above the median of `reference`.
double overlap_statistic(const std::vector<double>& population, const std::vector<double>& reference);

/// Scott's rule: sample std (n-1) times n^(-1/5). Zero for degenerate samples.
double scott_bandwidth(const std::vector<double>& samples);
std::vector<double> gaussian_kde(const std::vector<double>& samples, const std::vector<double>& grid,
                                 double bandwidth);

/// Populations `train-normal`, `test-normal`, `test-anomalous` with Gaussian
/// KDE curves on a shared 512-point grid spanning all scores plus a 5% margin.
/// Empty populations are dropped with a warning; non-finite scores are ignored.
ScoreDistributions export_score_distributions(const std::vector<double>& train_normal,
                                              const std::vector<double>& test_normal,
                                              const std::vector<double>& test_anomalous);

void write_pr_curve_csv(const std::filesystem::path& path, const PrCurve& curve);
void write_distributions_csv(const std::filesystem::path& path, const ScoreDistributions& d);
void write_kde_csv(const std::filesystem::path& path, const ScoreDistributions& d);

/// metrics.json body. `extra_json` is a JSON object merged at top level
/// (gamma, hyperparameters, ...).
std::string metrics_json(const EvaluationReport& report, const ScoreDistributions* distributions,
                         const std::string& extra_json = "{}");

}  // namespace divad::eval
