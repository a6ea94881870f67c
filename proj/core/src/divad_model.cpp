#include "divad/divad_model.hpp"

#include <random>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "divad/checkpoint.hpp"
#include "divad/distributions.hpp"
#include "divad/error.hpp"

namespace divad::model {
namespace {

constexpr Eigen::Index kInferenceChunk = 4096;

template <typename F>
Matrix chunked_rows(const Matrix& x, Eigen::Index out_cols, F&& f) {
    Matrix out(x.rows(), out_cols);
    for (Eigen::Index start = 0; start < x.rows(); start += kInferenceChunk) {
        const Eigen::Index n = std::min(kInferenceChunk, x.rows() - start);
        out.middleRows(start, n) = f(Matrix(x.middleRows(start, n)));
    }
    return out;
}

double mean_of(const Var& v) { return v.value().mean(); }

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::Dense ? "dense" : "recurrent"; }
std::string to_string(PriorKind p) { return p == PriorKind::FixedGaussian ? "gaussian" : "gm"; }

Architecture architecture_from_string(const std::string& text) {
    if (text == "dense") return Architecture::Dense;
    if (text == "recurrent") return Architecture::Recurrent;
    throw ArgumentError("unknown architecture '" + text + "' (expected dense or recurrent)");
}

PriorKind prior_from_string(const std::string& text) {
    if (text == "gaussian") return PriorKind::FixedGaussian;
    if (text == "gm") return PriorKind::LearnedGM;
    throw ArgumentError("unknown prior '" + text + "' (expected gaussian or gm)");
}

// DivadSpec

void DivadSpec::validate() const {
    if (window_length < 1 || n_features < 1 || encoding_dim < 1) {
        throw ConfigError("window length, feature count and encoding dim must be positive");
    }
    if (domain_ids.empty()) throw ConfigError("at least one training domain required");
    if (!std::is_sorted(domain_ids.begin(), domain_ids.end()) ||
        std::adjacent_find(domain_ids.begin(), domain_ids.end()) != domain_ids.end()) {
        throw ConfigError("domain ids must be sorted and unique");
    }
    if (prior == PriorKind::LearnedGM && n_components < 1) throw ConfigError("mixture prior needs K >= 1");
    if (prior_hidden < 1) throw ConfigError("domain prior hidden size must be positive");
    for (auto h : hidden_dims) {
        if (h < 1) throw ConfigError("hidden sizes must be positive");
    }
    if (architecture == Architecture::Recurrent && conv_kernel > window_length) {
        throw ConfigError("conv kernel exceeds window length");
    }
}

std::string DivadSpec::to_json() const {
    nlohmann::json j;
    j["architecture"] = to_string(architecture);
    j["window_length"] = window_length;
    j["n_features"] = n_features;
    j["encoding_dim"] = encoding_dim;
    j["domain_ids"] = domain_ids;
    j["prior"] = to_string(prior);
    j["n_components"] = n_components;
    j["hidden_dims"] = hidden_dims;
    j["prior_hidden"] = prior_hidden;
    j["conv_filters"] = conv_filters;
    j["conv_kernel"] = conv_kernel;
    j["conv_stride"] = conv_stride;
    j["gru_units"] = gru_units;
    return j.dump();
}

DivadSpec DivadSpec::from_json(const std::string& text) {
    DivadSpec s;
    try {
        const auto j = nlohmann::json::parse(text);
        s.architecture = architecture_from_string(j.at("architecture").get<std::string>());
        s.window_length = j.at("window_length").get<Eigen::Index>();
        s.n_features = j.at("n_features").get<Eigen::Index>();
        s.encoding_dim = j.at("encoding_dim").get<Eigen::Index>();
        s.domain_ids = j.at("domain_ids").get<std::vector<int>>();
        s.prior = prior_from_string(j.at("prior").get<std::string>());
        s.n_components = j.at("n_components").get<int>();
        s.hidden_dims = j.at("hidden_dims").get<std::vector<Eigen::Index>>();
        s.prior_hidden = j.at("prior_hidden").get<Eigen::Index>();
        s.conv_filters = j.at("conv_filters").get<Eigen::Index>();
        s.conv_kernel = j.at("conv_kernel").get<Eigen::Index>();
        s.conv_stride = j.at("conv_stride").get<Eigen::Index>();
        s.gru_units = j.at("gru_units").get<Eigen::Index>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model spec: ") + e.what());
    }
    s.validate();
    return s;
}

// MixturePrior

MixturePrior::MixturePrior(int n_components, Eigen::Index dim, const std::string& name, nn::Rng& rng) {
    if (n_components < 1 || dim < 1) throw ArgumentError("mixture prior dimensions must be positive");
    std::normal_distribution<double> normal;
    Matrix means(n_components, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
        for (Eigen::Index k = 0; k < n_components; ++k) means(k, c) = normal(rng);
    }
    logits_ = Parameter(name + ".logits", Matrix::Zero(1, n_components));
    means_ = Parameter(name + ".means", means);
    std_raw_ = Parameter(name + ".std_raw",
                         Matrix::Constant(n_components, dim, nn::softplus_inverse(1.0 - nn::kStdEpsilon)));
}

Var MixturePrior::log_prob_rows(Tape& tape, const Var& z) {
    if (z.cols() != dim()) {
        throw DimensionError("mixture prior expects dimension " + std::to_string(dim()) + ", got " +
                             std::to_string(z.cols()));
    }
    Var means = tape.parameter(means_);
    Var stds = nn::add_scalar(nn::softplus(tape.parameter(std_raw_)), nn::kStdEpsilon);
    Var log_w = nn::log_softmax_rows(tape.parameter(logits_));
    const double c = -0.5 * nn::kLogTwoPi * static_cast<double>(dim());
    std::vector<Var> columns;
    columns.reserve(static_cast<std::size_t>(n_components()));
    for (Eigen::Index k = 0; k < n_components(); ++k) {
        Var mu = nn::slice_rows(means, k, 1);
        Var sigma = nn::slice_rows(stds, k, 1);
        Var u = nn::mul_row(nn::add_row(z, nn::neg(mu)), nn::reciprocal(sigma));
        Var quad = nn::scale(nn::row_sum(nn::square(u)), -0.5);
        Var log_det = nn::add_scalar(nn::neg(nn::sum(nn::log(sigma))), c);
        columns.push_back(nn::add_row(quad, log_det));
    }
    return nn::logsumexp_rows(nn::add_row(nn::concat_cols(columns), log_w));
}

Vector MixturePrior::log_prob_rows(const Matrix& z) const {
    Tape tape(false);
    auto& self = const_cast<MixturePrior&>(*this);
    return self.log_prob_rows(tape, tape.constant(z)).value().col(0);
}

Vector MixturePrior::weights() const {
    const Vector l = logits_.value.row(0).transpose();
    const Vector e = (l.array() - l.maxCoeff()).exp();
    return e / e.sum();
}

Matrix MixturePrior::stds() const { return nn::softplus(std_raw_.value).array() + nn::kStdEpsilon; }

void MixturePrior::collect(std::vector<Parameter*>& out) {
    out.push_back(&logits_);
    out.push_back(&means_);
    out.push_back(&std_raw_);
}

double gm_log_prob(const MixturePrior& prior, const Vector& z) { return prior.log_prob_rows(Matrix(z.transpose()))(0); }

// ElboNoise

ElboNoise ElboNoise::sample(Eigen::Index batch, Eigen::Index dim, nn::Rng& rng, int kl_samples) {
    std::normal_distribution<double> normal;
    auto draw = [&] {
        Matrix m(batch, dim);
        for (Eigen::Index c = 0; c < dim; ++c) {
            for (Eigen::Index r = 0; r < batch; ++r) m(r, c) = normal(rng);
        }
        return m;
    };
    ElboNoise n;
    n.eps_y = draw();
    n.eps_d = draw();
    for (int s = 1; s < kl_samples; ++s) n.extra_y.push_back(draw());
    return n;
}

std::string LossBreakdown::describe() const {
    std::ostringstream os;
    os << "total=" << total << " recon=" << recon << " kl_y=" << kl_y << " kl_d=" << kl_d << " ce=" << ce;
    return os.str();
}

// DivadModel

DivadModel::DivadModel(DivadSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    nn::Rng rng(seed);
    const auto latent = spec_.encoding_dim;
    if (spec_.architecture == Architecture::Dense) {
        auto encoder = [&](const std::string& name) {
            return nn::DenseStack({spec_.input_dim(), spec_.hidden_dims, latent, nn::HeadKind::Gaussian}, name, rng);
        };
        encoder_y_ = encoder("enc_y");
        encoder_d_ = encoder("enc_d");
        decoder_ = nn::DenseStack({2 * latent, spec_.hidden_dims, spec_.input_dim(), nn::HeadKind::Gaussian}, "dec",
                                  rng);
    } else {
        nn::RecurrentEncoderSpec enc{spec_.window_length, spec_.n_features, spec_.conv_filters, spec_.conv_kernel,
                                     spec_.conv_stride,   spec_.gru_units,  latent};
        encoder_y_ = nn::RecurrentEncoder(enc, "enc_y", rng);
        encoder_d_ = nn::RecurrentEncoder(enc, "enc_d", rng);
        nn::RecurrentDecoderSpec dec{2 * latent,         spec_.window_length, spec_.n_features, spec_.conv_filters,
                                     spec_.conv_kernel, spec_.conv_stride,   spec_.gru_units};
        decoder_ = nn::RecurrentDecoder(dec, "dec", rng);
    }
    domain_prior_ = nn::DenseStack({spec_.n_domains(), {spec_.prior_hidden}, latent, nn::HeadKind::Gaussian},
                                   "prior_d", rng);
    classifier_ = nn::Linear(latent, spec_.n_domains(), "clf", rng);
    if (spec_.prior == PriorKind::LearnedGM) mixture_ = MixturePrior(spec_.n_components, latent, "prior_y", rng);
}

std::vector<Parameter*> DivadModel::parameters() {
    std::vector<Parameter*> out;
    encoder_y_.collect(out);
    encoder_d_.collect(out);
    decoder_.collect(out);
    domain_prior_.collect(out);
    classifier_.collect(out);
    if (spec_.prior == PriorKind::LearnedGM) mixture_.collect(out);
    return out;
}

int DivadModel::domain_index(int domain_id) const {
    auto it = std::lower_bound(spec_.domain_ids.begin(), spec_.domain_ids.end(), domain_id);
    if (it == spec_.domain_ids.end() || *it != domain_id) {
        throw IndexError("domain " + std::to_string(domain_id) + " was not seen in training");
    }
    return static_cast<int>(it - spec_.domain_ids.begin());
}

std::vector<int> DivadModel::domain_indices(const std::vector<int>& domain_ids) const {
    std::vector<int> out;
    out.reserve(domain_ids.size());
    for (int d : domain_ids) out.push_back(domain_index(d));
    return out;
}

Var DivadModel::one_hot(Tape& tape, const std::vector<int>& d) const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d.size()), spec_.n_domains());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] < 0 || d[i] >= spec_.n_domains()) {
            throw IndexError("domain index " + std::to_string(d[i]) + " out of range [0, " +
                             std::to_string(spec_.n_domains()) + ")");
        }
        m(static_cast<Eigen::Index>(i), d[i]) = 1.0;
    }
    return tape.constant(std::move(m));
}

ObjectiveTerms DivadModel::terms(Tape& tape, const Matrix& x, const std::vector<int>& d, const ElboNoise& noise) {
    const Eigen::Index batch = x.rows();
    if (static_cast<Eigen::Index>(d.size()) != batch) throw DimensionError("one domain label per window required");
    if (noise.eps_y.rows() != batch || noise.eps_d.rows() != batch || noise.eps_y.cols() != spec_.encoding_dim ||
        noise.eps_d.cols() != spec_.encoding_dim) {
        throw DimensionError("noise must be " + std::to_string(batch) + " x " + std::to_string(spec_.encoding_dim));
    }
    Var input = tape.constant(x);
    auto q_y = encoder_y_.forward(tape, input);
    auto q_d = encoder_d_.forward(tape, input);
    Var z_y = nn::reparameterize(q_y, tape.constant(noise.eps_y));
    Var z_d = nn::reparameterize(q_d, tape.constant(noise.eps_d));

    ObjectiveTerms t;
    auto p_x = decoder_.forward(tape, nn::concat_cols({z_d, z_y}));
    t.recon = nn::gaussian_log_prob_rows(input, p_x);

    if (spec_.prior == PriorKind::FixedGaussian) {
        t.kl_y = nn::kl_standard_normal_rows(q_y);
    } else {
        auto single = [&](const Var& z) { return nn::sub(nn::gaussian_log_prob_rows(z, q_y), mixture_.log_prob_rows(tape, z)); };
        t.kl_y = single(z_y);
        for (const auto& eps : noise.extra_y) t.kl_y = nn::add(t.kl_y, single(nn::reparameterize(q_y, tape.constant(eps))));
        if (!noise.extra_y.empty()) t.kl_y = nn::scale(t.kl_y, 1.0 / static_cast<double>(noise.extra_y.size() + 1));
    }

    auto p_d = domain_prior_.forward_gaussian(tape, one_hot(tape, d));
    t.kl_d = nn::kl_diagonal_rows(q_d, p_d);
    t.ce = nn::categorical_cross_entropy_rows(classifier_.forward(tape, nn::relu(z_d)), d);
    return t;
}

Var DivadModel::total_objective(const ObjectiveTerms& t, const ObjectiveWeights& w) {
    Var per_row = nn::add(nn::neg(t.recon), nn::scale(nn::add(t.kl_y, t.kl_d), w.beta));
    if (w.alpha_d != 0.0) per_row = nn::add(per_row, nn::scale(t.ce, w.alpha_d));
    return nn::mean(per_row);
}

LossBreakdown DivadModel::breakdown(const ObjectiveTerms& t, const ObjectiveWeights& w) {
    LossBreakdown b;
    b.recon = mean_of(t.recon);
    b.kl_y = mean_of(t.kl_y);
    b.kl_d = mean_of(t.kl_d);
    b.ce = mean_of(t.ce);
    b.total = -b.recon + w.beta * (b.kl_y + b.kl_d) + w.alpha_d * b.ce;
    if (!std::isfinite(b.total)) throw DivergenceError("non-finite objective: " + b.describe());
    return b;
}

LossBreakdown DivadModel::evaluate(const Matrix& x, const std::vector<int>& d, const ElboNoise& noise,
                                   const ObjectiveWeights& w) {
    Tape tape(false);
    return breakdown(terms(tape, x, d, noise), w);
}

Matrix DivadModel::encode_y(const Matrix& x) {
    return chunked_rows(x, spec_.encoding_dim, [&](const Matrix& chunk) {
        Tape tape(false);
        return Matrix(encoder_y_.forward(tape, tape.constant(chunk)).mean.value());
    });
}

Matrix DivadModel::encode_d(const Matrix& x) {
    return chunked_rows(x, spec_.encoding_dim, [&](const Matrix& chunk) {
        Tape tape(false);
        return Matrix(encoder_d_.forward(tape, tape.constant(chunk)).mean.value());
    });
}

Matrix DivadModel::domain_logits(const Matrix& x) {
    return chunked_rows(x, spec_.n_domains(), [&](const Matrix& chunk) {
        Tape tape(false);
        Var z = encoder_d_.forward(tape, tape.constant(chunk)).mean;
        return Matrix(classifier_.forward(tape, nn::relu(z)).value());
    });
}

Vector DivadModel::prior_log_prob(const Matrix& z) const {
    if (z.cols() != spec_.encoding_dim) throw DimensionError("encoding width differs from the model's M'");
    if (spec_.prior == PriorKind::LearnedGM) return mixture_.log_prob_rows(z);
    const double c = -0.5 * nn::kLogTwoPi * static_cast<double>(z.cols());
    return (c - 0.5 * z.rowwise().squaredNorm().array()).matrix();
}

density::DensityEstimate DivadModel::fit_aggregated_posterior(const Matrix& x, std::uint64_t seed) {
    nn::Rng rng(seed);
    std::normal_distribution<double> normal;
    const Matrix z = chunked_rows(x, spec_.encoding_dim, [&](const Matrix& chunk) {
        Tape tape(false);
        const auto q = encoder_y_.forward(tape, tape.constant(chunk));
        Matrix eps(chunk.rows(), spec_.encoding_dim);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
        return Matrix(q.mean.value().array() + q.std.value().array() * eps.array());
    });
    if (spec_.prior == PriorKind::FixedGaussian) return density::MultivariateGaussian::fit(z);
    return density::GaussianMixture::fit(z, spec_.n_components);
}

void DivadModel::save(const std::filesystem::path& path) { nn::save_checkpoint(path, parameters(), spec_.to_json()); }

DivadModel DivadModel::load(const std::filesystem::path& path) {
    const auto ck = nn::load_checkpoint(path);
    DivadModel m(DivadSpec::from_json(ck.spec_json), 0);
    nn::restore_parameters(ck, m.parameters());
    return m;
}

// DivadObjective

train::LossOutput DivadObjective::loss(Tape& tape, const Matrix& x, const std::vector<int>& labels, nn::Rng& noise) {
    const auto eps = ElboNoise::sample(x.rows(), model_.spec().encoding_dim, noise, kl_samples_);
    auto t = model_.terms(tape, x, labels, eps);
    const auto b = DivadModel::breakdown(t, weights_);
    return {DivadModel::total_objective(t, weights_),
            {{"recon", b.recon}, {"kl_y", b.kl_y}, {"kl_d", b.kl_d}, {"ce", b.ce}}};
}

}  // namespace divad::model
