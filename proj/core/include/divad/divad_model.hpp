#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "divad/autodiff.hpp"
#include "divad/density.hpp"
#include "divad/layers.hpp"
#include "divad/trainer.hpp"

namespace divad::model {

using nn::Matrix;
using nn::Parameter;
using nn::Tape;
using nn::Var;
using nn::Vector;

enum class Architecture { Dense, Recurrent };
enum class PriorKind { FixedGaussian, LearnedGM };

std::string to_string(Architecture a);
std::string to_string(PriorKind p);
Architecture architecture_from_string(const std::string& text);
PriorKind prior_from_string(const std::string& text);

/// Shape and architecture of a DIVAD model.
struct DivadSpec {
    Architecture architecture = Architecture::Dense;
    Eigen::Index window_length = 1;
    Eigen::Index n_features = 1;
    Eigen::Index encoding_dim = 16;
    /// Sorted training domain ids; position i is the classifier's class i.
    std::vector<int> domain_ids{0};
    PriorKind prior = PriorKind::FixedGaussian;
    int n_components = 8;
    std::vector<Eigen::Index> hidden_dims{200};
    Eigen::Index prior_hidden = 64;
    Eigen::Index conv_filters = 64;
    Eigen::Index conv_kernel = 5;
    Eigen::Index conv_stride = 1;
    Eigen::Index gru_units = 64;

    [[nodiscard]] Eigen::Index input_dim() const { return window_length * n_features; }
    [[nodiscard]] int n_domains() const { return static_cast<int>(domain_ids.size()); }
    void validate() const;
    [[nodiscard]] std::string to_json() const;
    static DivadSpec from_json(const std::string& text);
};

/// Learned K-component diagonal Gaussian mixture over z_y. Weights are kept
/// as logits and standard deviations as softplus(raw) + kStdEpsilon.
class MixturePrior {
public:
    MixturePrior() = default;
    MixturePrior(int n_components, Eigen::Index dim, const std::string& name, nn::Rng& rng);

    [[nodiscard]] Var log_prob_rows(Tape& tape, const Var& z);
    [[nodiscard]] Vector log_prob_rows(const Matrix& z) const;

    [[nodiscard]] Vector weights() const;
    [[nodiscard]] Matrix means() const { return means_.value; }
    [[nodiscard]] Matrix stds() const;
    [[nodiscard]] int n_components() const { return static_cast<int>(means_.value.rows()); }
    [[nodiscard]] Eigen::Index dim() const { return means_.value.cols(); }

    Parameter& logits() { return logits_; }
    Parameter& mean_param() { return means_; }
    Parameter& std_param() { return std_raw_; }
    void collect(std::vector<Parameter*>& out);

private:
    Parameter logits_;   // 1 x K
    Parameter means_;    // K x D
    Parameter std_raw_;  // K x D
};

/// log sum_k w_k N(z; mu_k, diag sigma_k^2), stabilized by log-sum-exp.
double gm_log_prob(const MixturePrior& prior, const Vector& z);

/// Standard-normal draws feeding the reparameterized samples of one batch.
/// `extra_y` holds additional z_y draws for a multi-sample mixture KL.
struct ElboNoise {
    Matrix eps_y;  // B x M'
    Matrix eps_d;  // B x M'
    std::vector<Matrix> extra_y;

    static ElboNoise sample(Eigen::Index batch, Eigen::Index dim, nn::Rng& rng, int kl_samples = 1);
};

/// Per-row terms of the objective (each R x 1).
struct ObjectiveTerms {
    Var recon;  // log p(x | z_d, z_y), one sample
    Var kl_y;
    Var kl_d;
    Var ce;     // domain-classification cross-entropy
};

struct ObjectiveWeights {
    double beta = 1.0;
    double alpha_d = 1e5;
};

/// Batch means of the objective and its terms.
struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double kl_y = 0.0;
    double kl_d = 0.0;
    double ce = 0.0;
    [[nodiscard]] double elbo(double beta) const { return recon - beta * (kl_y + kl_d); }
    [[nodiscard]] std::string describe() const;
};

/// Two-encoder variational autoencoder with a domain-conditioned prior on z_d,
/// a fixed or learned prior on z_y and a domain classifier on z_d.
class DivadModel {
public:
    DivadModel() = default;
    DivadModel(DivadSpec spec, std::uint64_t seed);

    [[nodiscard]] const DivadSpec& spec() const { return spec_; }
    [[nodiscard]] std::vector<Parameter*> parameters();

    /// Classifier index of a domain id; throws IndexError for unseen domains.
    [[nodiscard]] int domain_index(int domain_id) const;
    [[nodiscard]] std::vector<int> domain_indices(const std::vector<int>& domain_ids) const;

    /// Records the per-row terms for a batch of flattened windows `x` with
    /// domain indices `d`. The classifier reuses the z_d sample of the decoder.
    [[nodiscard]] ObjectiveTerms terms(Tape& tape, const Matrix& x, const std::vector<int>& d, const ElboNoise& noise);
    /// mean over rows of -recon + beta (kl_y + kl_d) + alpha_d ce.
    [[nodiscard]] static Var total_objective(const ObjectiveTerms& t, const ObjectiveWeights& w);
    /// Throws DivergenceError listing every term when the total is not finite.
    static LossBreakdown breakdown(const ObjectiveTerms& t, const ObjectiveWeights& w);

    /// Numeric objective (no gradients).
    [[nodiscard]] LossBreakdown evaluate(const Matrix& x, const std::vector<int>& d, const ElboNoise& noise,
                                         const ObjectiveWeights& w);

    /// Posterior means of q(z_y | x) and q(z_d | x), one row per window.
    [[nodiscard]] Matrix encode_y(const Matrix& x);
    [[nodiscard]] Matrix encode_d(const Matrix& x);
    /// Classifier logits evaluated at the z_d posterior mean.
    [[nodiscard]] Matrix domain_logits(const Matrix& x);

    /// log p(z_y) under the model's prior, per row.
    [[nodiscard]] Vector prior_log_prob(const Matrix& z) const;
    [[nodiscard]] const MixturePrior& mixture_prior() const { return mixture_; }
    MixturePrior& mixture_prior() { return mixture_; }

    /// Gaussian for a fixed prior, K-component mixture (EM) for a learned one,
    /// fitted to one z_y sample per window of `x`.
    [[nodiscard]] density::DensityEstimate fit_aggregated_posterior(const Matrix& x, std::uint64_t seed);

    void save(const std::filesystem::path& path);
    static DivadModel load(const std::filesystem::path& path);

private:
    [[nodiscard]] Var one_hot(Tape& tape, const std::vector<int>& d) const;

    DivadSpec spec_;
    nn::GaussianNetwork encoder_y_;
    nn::GaussianNetwork encoder_d_;
    nn::GaussianNetwork decoder_;
    nn::DenseStack domain_prior_;
    nn::Linear classifier_;
    MixturePrior mixture_;
};

/// Adapts a model and objective weights to the generic trainer. Labels are
/// domain indices; noise is drawn fresh for every batch.
class DivadObjective : public train::Trainable {
public:
    DivadObjective(DivadModel& model, ObjectiveWeights weights, int kl_samples = 1)
        : model_(model), weights_(weights), kl_samples_(kl_samples) {}

    std::vector<Parameter*> parameters() override { return model_.parameters(); }
    train::LossOutput loss(Tape& tape, const Matrix& x, const std::vector<int>& labels, nn::Rng& noise) override;

private:
    DivadModel& model_;
    ObjectiveWeights weights_;
    int kl_samples_;
};

}  // namespace divad::model
