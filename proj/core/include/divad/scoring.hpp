#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "divad/dataset.hpp"
#include "divad/density.hpp"
#include "divad/divad_model.hpp"

namespace divad::scoring {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Maps windows to anomaly scores; higher is more anomalous. Inputs are
/// standardized windows flattened one per row (B x L*M).
class WindowScorer {
public:
    virtual ~WindowScorer() = default;
    virtual Vector score(const Matrix& windows) = 0;
    [[nodiscard]] virtual std::string method() const = 0;
    [[nodiscard]] virtual Eigen::Index window_length() const = 0;
};

/// Wraps a plain function; mostly useful in tests.
class FunctionScorer : public WindowScorer {
public:
    using Fn = std::function<Vector(const Matrix&)>;
    FunctionScorer(Fn fn, Eigen::Index window_length, std::string method = "function")
        : fn_(std::move(fn)), window_length_(window_length), method_(std::move(method)) {}
    Vector score(const Matrix& windows) override { return fn_(windows); }
    [[nodiscard]] std::string method() const override { return method_; }
    [[nodiscard]] Eigen::Index window_length() const override { return window_length_; }

private:
    Fn fn_;
    Eigen::Index window_length_;
    std::string method_;
};

/// -log p(f_y(x)) under the model's z_y prior.
Vector score_prior(model::DivadModel& model, const Matrix& windows);
/// -log q(f_y(x)) under a fitted aggregated-posterior estimate; throws
/// StateError when `q` is unfitted.
Vector score_agg_posterior(model::DivadModel& model, const density::DensityEstimate& q, const Matrix& windows);

class PriorScorer : public WindowScorer {
public:
    explicit PriorScorer(std::shared_ptr<model::DivadModel> model) : model_(std::move(model)) {}
    Vector score(const Matrix& windows) override { return score_prior(*model_, windows); }
    [[nodiscard]] std::string method() const override { return "divad-prior"; }
    [[nodiscard]] Eigen::Index window_length() const override { return model_->spec().window_length; }

private:
    std::shared_ptr<model::DivadModel> model_;
};

class AggPosteriorScorer : public WindowScorer {
public:
    AggPosteriorScorer(std::shared_ptr<model::DivadModel> model, density::DensityEstimate q)
        : model_(std::move(model)), q_(std::move(q)) {}
    Vector score(const Matrix& windows) override { return score_agg_posterior(*model_, q_, windows); }
    [[nodiscard]] std::string method() const override { return "divad-agg-posterior"; }
    [[nodiscard]] Eigen::Index window_length() const override { return model_->spec().window_length; }

private:
    std::shared_ptr<model::DivadModel> model_;
    density::DensityEstimate q_;
};

/// Literal: m_L = (1-g) y_L and m_t = (g m_{t-1} + (1-g) y_t) / (1 - g^(t+1))
/// for t > L, with 1-based t. BiasCorrected: the usual unnormalized
/// accumulator s_t divided by (1 - g^(t-L+1)).
enum class SmoothingMode { Literal, BiasCorrected };

/// Record scores from the window scores y_L..y_T (`raw[0]` is y_L). The
/// result has T = raw.size() + L - 1 entries, the first L-1 being -inf.
/// Throws ArgumentError unless 0 <= gamma < 1.
std::vector<double> smooth(const std::vector<double>& raw, double gamma, Eigen::Index window_length,
                           SmoothingMode mode = SmoothingMode::Literal);

/// 0, 0.8, 0.9, 0.95, 0.96667, 0.975, 0.98, 0.98333, 0.9875, 0.99167, 0.99375, 0.995.
const std::vector<double>& default_gamma_grid();

struct SequenceScores {
    std::string sequence_id;
    std::vector<std::int64_t> timestamps;
    std::vector<double> raw;       // -inf before the first full window
    std::vector<double> smoothed;  // -inf before the first full window

    [[nodiscard]] std::size_t size() const { return smoothed.size(); }
};

/// Window scores y_t for every t >= L of a standardized sequence, computed in
/// batches. Empty, with a warning, when the sequence is shorter than L.
std::vector<double> window_scores(WindowScorer& scorer, const data::Sequence& sequence);

/// Per-record scores of a standardized sequence. The score at t uses only
/// records up to t.
class OnlineScorer {
public:
    OnlineScorer(WindowScorer& scorer, double gamma, SmoothingMode mode = SmoothingMode::Literal);

    [[nodiscard]] SequenceScores score(const data::Sequence& sequence) const;
    /// Smooths precomputed window scores (reuse across a gamma grid).
    [[nodiscard]] SequenceScores from_window_scores(const data::Sequence& sequence,
                                                    const std::vector<double>& raw) const;
    [[nodiscard]] double gamma() const { return gamma_; }

private:
    WindowScorer* scorer_;
    double gamma_;
    SmoothingMode mode_;
};

SequenceScores score_sequence(WindowScorer& scorer, const data::Sequence& sequence, double gamma,
                              SmoothingMode mode = SmoothingMode::Literal);

/// CSV `timestamp,raw_score,smoothed_score`; raw is empty before the first
/// full window, smoothed reads `-inf` there.
void write_scores_csv(const std::filesystem::path& path, const SequenceScores& scores);
SequenceScores read_scores_csv(const std::filesystem::path& path);

}  // namespace divad::scoring
