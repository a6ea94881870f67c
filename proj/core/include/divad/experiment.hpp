#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "divad/baselines.hpp"
#include "divad/dataset.hpp"
#include "divad/divad_model.hpp"
#include "divad/evaluation.hpp"
#include "divad/synthgen.hpp"

namespace divad::experiment {

enum class Method { DivadG, DivadGM, Pca, Maha, DenseAe, DenseVae };
enum class Strategy { Prior, AggPosterior, Both };

std::string to_string(Method m);
std::string to_string(Strategy s);
/// Directory and summary label of a scoring strategy: `prior` and
/// `agg-posterior` for DIVAD, `default` for the baselines.
std::string scoring_label(Method m, Strategy s);
Method method_from_string(const std::string& text);
Strategy strategy_from_string(const std::string& text);

/// One experiment: a dataset, a method and its hyperparameter grids. Every
/// combination of the grids relevant to the method is one grid point; the
/// learning rate is picked per point by validation loss and every gamma is
/// evaluated on the same trained model.
struct RunConfig {
    std::string dataset;                     // manifest path; empty when `synth` is set
    std::optional<synth::SynthConfig> synth;
    Method method = Method::DivadGM;
    model::Architecture variant = model::Architecture::Dense;
    Strategy scoring = Strategy::Both;
    Eigen::Index window_length = 1;

    std::vector<double> beta{1.0, 5.0};
    std::vector<double> alpha_d{1e5};
    std::vector<Eigen::Index> encoding_dim{16, 32, 64};
    std::vector<int> n_components{8};
    std::vector<double> learning_rate{1e-5, 3e-5, 1e-4, 3e-4};
    std::vector<double> gamma;               // empty means the default 12-value grid
    /// PCA: values >= 1 are component counts, values in (0, 1) variance fractions.
    std::vector<double> pca_components{0.9};
    std::vector<Eigen::Index> hidden_dims{200};

    int epochs = 300;
    int patience = 100;
    Eigen::Index batch_size = 128;
    double val_fraction = 0.2;
    int kl_samples = 1;
    int vae_samples = baselines::DenseVae::kDefaultSamples;
    std::uint64_t seed = 0;

    std::string output_dir = "runs";
    std::string run_name;                    // empty means `<timestamp>-<method>`

    /// Throws ConfigError on empty grids, an incompatible method/variant or both
    /// data sources set.
    void validate() const;
    [[nodiscard]] std::vector<double> gammas() const;
    [[nodiscard]] bool is_divad() const { return method == Method::DivadG || method == Method::DivadGM; }
    [[nodiscard]] std::vector<Strategy> strategies() const;

    [[nodiscard]] std::string to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static RunConfig from_json(const std::string& text);
};

/// Hyperparameters of one grid point.
struct GridPoint {
    double beta = 1.0;
    double alpha_d = 1e5;
    Eigen::Index encoding_dim = 16;
    int n_components = 8;
    double pca_components = 0.9;
};

std::vector<GridPoint> grid_points(const RunConfig& config);

/// Canonical JSON of everything that determines a grid point's results.
std::string point_json(const RunConfig& config, const GridPoint& point);
/// 16 hex digits of the 64-bit FNV-1a digest of `text`.
std::string stable_hash(const std::string& text);

/// Loads the manifest or generates the synthetic dataset; ConfigError when
/// neither is set.
data::Dataset resolve_dataset(const RunConfig& config);

/// Training and validation windows of the training sequences. Windows holding
/// a labeled anomaly are dropped, the split is stratified by sequence, the
/// training part is balanced across domains and the standardizer sees the
/// training part only.
struct Prepared {
    data::Standardizer standardizer;
    data::WindowSet train;  // standardized, balanced
    data::WindowSet val;    // standardized
    data::WindowSet normal; // standardized, every clean training window once
    std::vector<int> domain_ids;
    std::vector<std::string> train_sequences;
    std::vector<std::string> test_sequences;
};

Prepared prepare(const RunConfig& config, const data::Dataset& dataset);

/// Throws ConfigError when a test sequence id or its windows reached the fit.
void audit_provenance(const Prepared& prepared, const data::Dataset& dataset);

/// A trained model directory: `point.json`, `standardizer.json`, the model
/// files and `history.csv` for trained methods.
class Bundle {
public:
    static Bundle load(const std::filesystem::path& directory);

    [[nodiscard]] Method method() const { return method_; }
    [[nodiscard]] const data::Standardizer& standardizer() const { return standardizer_; }
    [[nodiscard]] Eigen::Index window_length() const { return window_length_; }
    [[nodiscard]] std::vector<Strategy> strategies() const;
    /// Window scorer for `s` (Prior for baselines).
    [[nodiscard]] std::unique_ptr<scoring::WindowScorer> scorer(Strategy s);

    [[nodiscard]] std::shared_ptr<model::DivadModel> divad() const { return divad_; }

private:
    friend Bundle train_point(const RunConfig&, const GridPoint&, const Prepared&, const std::filesystem::path&);

    Method method_ = Method::DivadGM;
    Eigen::Index window_length_ = 1;
    int vae_samples_ = baselines::DenseVae::kDefaultSamples;
    data::Standardizer standardizer_;
    std::shared_ptr<model::DivadModel> divad_;
    density::DensityEstimate agg_posterior_;
    std::shared_ptr<baselines::PcaModel> pca_;
    std::shared_ptr<baselines::MahalanobisModel> maha_;
    std::shared_ptr<baselines::DenseAutoencoder> ae_;
    std::shared_ptr<baselines::DenseVae> vae_;
};

/// Fits one grid point and writes its bundle under `directory`.
Bundle train_point(const RunConfig& config, const GridPoint& point, const Prepared& prepared,
                   const std::filesystem::path& directory);

/// Writes raw window scores to `directory/scores/<strategy>/`: one CSV per
/// test sequence and `train-normal.csv` for the training windows.
void score_point(Bundle& bundle, const Prepared& prepared, const data::Dataset& dataset,
                 const std::filesystem::path& directory);

struct Evaluation {
    Strategy strategy = Strategy::Prior;
    double gamma = 0.0;
    eval::PeakF1 peak;
};

struct PointResult {
    std::string hash;
    GridPoint point;
    bool completed = false;
    std::string error;
    std::vector<Evaluation> evaluations;
    /// Per strategy, from raw window scores.
    std::vector<std::pair<Strategy, eval::ScoreDistributions>> distributions;
    std::filesystem::path directory;

    /// Highest peak F1 over evaluations with strategy `s` (any strategy when empty).
    [[nodiscard]] const Evaluation* best(std::optional<Strategy> s = std::nullopt) const;
};

/// Reads the scores written by `score_point`, smooths them for every gamma
/// and writes `metrics.json`, the PR curve of the best gamma per strategy,
/// score distributions and KDE curves.
PointResult evaluate_point(const RunConfig& config, const data::Dataset& dataset,
                           const std::filesystem::path& directory);

struct RunResult {
    std::filesystem::path directory;
    std::vector<PointResult> points;
    [[nodiscard]] bool all_completed() const;
};

/// Trains, scores and evaluates every grid point, then writes `config.json`
/// and `summary.csv` (one row per grid point, strategy and gamma). A failing
/// grid point is recorded and the run continues.
RunResult run_experiment(const RunConfig& config);
RunResult run_experiment(const RunConfig& config, const data::Dataset& dataset);

/// One row per completed (grid point, strategy, gamma), one `failed` row per
/// failed grid point.
void write_summary(const std::filesystem::path& path, Method method, const std::vector<PointResult>& points);

struct LodoFold {
    int domain_id = 0;
    bool skipped = false;
    RunResult run;
};

/// Leave-one-domain-out: every domain in turn is the test domain with its
/// labels kept; the others form the training set, their anomalous windows
/// dropped. Domains without anomalies are skipped with a warning. Writes
/// `lodo_summary.csv` with one row per held-out domain.
std::vector<LodoFold> run_lodo(const RunConfig& config, const data::Dataset& dataset);

/// Markdown table of the best peak F1 per run under `runs_root`, read from
/// the `summary.csv` files.
std::string report(const std::filesystem::path& runs_root);

}  // namespace divad::experiment
