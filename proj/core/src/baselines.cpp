#include "divad/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "divad/checkpoint.hpp"
#include "divad/distributions.hpp"
#include "divad/error.hpp"

namespace divad::baselines {
namespace {

nlohmann::json to_json_matrix(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix from_json_matrix(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("matrix data length mismatch");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

void require_width(const Matrix& x, Eigen::Index expected, const char* what) {
    if (x.cols() != expected) {
        throw DimensionError(std::string(what) + ": expected width " + std::to_string(expected) + ", got " +
                             std::to_string(x.cols()));
    }
}

std::uint64_t row_seed(const Matrix& x, Eigen::Index row, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double v = x(row, c);
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

constexpr Eigen::Index kVaeScoreChunk = 16;

}  // namespace

// PCA

PcaModel PcaModel::fit(const Matrix& train, PcaComponents components) {
    if (train.rows() == 0) throw EmptyInputError("PCA needs at least one training window");
    const Eigen::Index d = train.cols();
    PcaModel m;
    m.mean_ = train.colwise().mean().transpose();
    const Matrix centered = train.rowwise() - m.mean_.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(train.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
    const Matrix vectors = eig.eigenvectors().rowwise().reverse();

    Eigen::Index k = 0;
    if (const auto* n = std::get_if<Eigen::Index>(&components)) {
        if (*n < 1 || *n > d) {
            throw ArgumentError("PCA components " + std::to_string(*n) + " outside [1, " + std::to_string(d) + "]");
        }
        k = *n;
    } else {
        const double fraction = std::get<double>(components);
        if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("PCA variance fraction must lie in (0, 1]");
        const double total = values.sum();
        k = d;
        if (total > 0.0) {
            double cumulative = 0.0;
            for (Eigen::Index i = 0; i < d; ++i) {
                cumulative += values(i);
                if (cumulative / total >= fraction * (1.0 - 1e-12)) {
                    k = i + 1;
                    break;
                }
            }
        } else {
            k = 1;
        }
    }
    m.components_ = vectors.leftCols(k);
    return m;
}

Vector PcaModel::score(const Matrix& x) const {
    require_width(x, mean_.size(), "PCA");
    const Matrix centered = x.rowwise() - mean_.transpose();
    const Matrix residual = centered - (centered * components_) * components_.transpose();
    return residual.rowwise().squaredNorm() / static_cast<double>(x.cols());
}

std::string PcaModel::to_json() const {
    nlohmann::json j{{"kind", "pca"}, {"mean", to_json_matrix(mean_)}, {"components", to_json_matrix(components_)}};
    return j.dump();
}

PcaModel PcaModel::from_json(const std::string& text) {
    const auto j = parse_json(text, "PCA model");
    PcaModel m;
    m.mean_ = from_json_matrix(j.at("mean"));
    m.components_ = from_json_matrix(j.at("components"));
    return m;
}

// Mahalanobis

MahalanobisModel MahalanobisModel::fit(const Matrix& train) {
    if (train.rows() == 0) throw EmptyInputError("Mahalanobis needs at least one training window");
    MahalanobisModel m;
    m.mean_ = train.colwise().mean().transpose();
    const Matrix centered = train.rowwise() - m.mean_.transpose();
    m.covariance_ = centered.transpose() * centered / static_cast<double>(train.rows());
    m.covariance_ += kRidge * Matrix::Identity(train.cols(), train.cols());
    m.factorize();
    return m;
}

void MahalanobisModel::factorize() {
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) throw Error("covariance not positive definite after ridge");
    precision_ = llt.solve(Matrix::Identity(covariance_.rows(), covariance_.cols()));
}

Vector MahalanobisModel::score(const Matrix& x) const {
    require_width(x, mean_.size(), "Mahalanobis");
    const Matrix centered = x.rowwise() - mean_.transpose();
    return (centered * precision_).cwiseProduct(centered).rowwise().sum();
}

std::string MahalanobisModel::to_json() const {
    nlohmann::json j{{"kind", "maha"}, {"mean", to_json_matrix(mean_)}, {"covariance", to_json_matrix(covariance_)}};
    return j.dump();
}

MahalanobisModel MahalanobisModel::from_json(const std::string& text) {
    const auto j = parse_json(text, "Mahalanobis model");
    MahalanobisModel m;
    m.mean_ = from_json_matrix(j.at("mean"));
    m.covariance_ = from_json_matrix(j.at("covariance"));
    m.factorize();
    return m;
}

// Autoencoder spec

std::string AutoencoderSpec::to_json() const {
    nlohmann::json j{{"input_dim", input_dim}, {"hidden_dims", hidden_dims}, {"encoding_dim", encoding_dim}};
    return j.dump();
}

AutoencoderSpec AutoencoderSpec::from_json(const std::string& text) {
    const auto j = parse_json(text, "autoencoder spec");
    AutoencoderSpec s;
    s.input_dim = j.at("input_dim").get<Eigen::Index>();
    s.hidden_dims = j.at("hidden_dims").get<std::vector<Eigen::Index>>();
    s.encoding_dim = j.at("encoding_dim").get<Eigen::Index>();
    return s;
}

// Dense AE

DenseAutoencoder::DenseAutoencoder(AutoencoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    nn::Rng rng(seed);
    encoder_ = nn::DenseStack({spec_.input_dim, spec_.hidden_dims, spec_.encoding_dim, nn::HeadKind::Linear,
                               nn::Activation::Relu, nn::Activation::Relu},
                              "enc", rng);
    std::vector<Eigen::Index> mirrored(spec_.hidden_dims.rbegin(), spec_.hidden_dims.rend());
    decoder_ = nn::DenseStack({spec_.encoding_dim, mirrored, spec_.input_dim, nn::HeadKind::Linear}, "dec", rng);
}

std::vector<nn::Parameter*> DenseAutoencoder::parameters() {
    std::vector<nn::Parameter*> out;
    encoder_.collect(out);
    decoder_.collect(out);
    return out;
}

train::LossOutput DenseAutoencoder::loss(nn::Tape& tape, const Matrix& x, const std::vector<int>&, nn::Rng&) {
    nn::Var input = tape.constant(x);
    nn::Var recon = decoder_.forward(tape, encoder_.forward(tape, input));
    nn::Var mse = nn::mean(nn::square(nn::sub(recon, input)));
    return {mse, {{"mse", mse.value()(0, 0)}}};
}

Matrix DenseAutoencoder::reconstruct(const Matrix& x) {
    require_width(x, spec_.input_dim, "dense AE");
    nn::Tape tape(false);
    return decoder_.forward(tape, encoder_.forward(tape, tape.constant(x))).value();
}

Vector DenseAutoencoder::score(const Matrix& x) {
    return (reconstruct(x) - x).rowwise().squaredNorm() / static_cast<double>(x.cols());
}

void DenseAutoencoder::save(const std::filesystem::path& path) { nn::save_checkpoint(path, parameters(), spec_.to_json()); }

DenseAutoencoder DenseAutoencoder::load(const std::filesystem::path& path) {
    const auto ck = nn::load_checkpoint(path);
    DenseAutoencoder m(AutoencoderSpec::from_json(ck.spec_json), 0);
    nn::restore_parameters(ck, m.parameters());
    return m;
}

// Dense VAE

DenseVae::DenseVae(AutoencoderSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    nn::Rng rng(seed);
    encoder_ = nn::DenseStack({spec_.input_dim, spec_.hidden_dims, spec_.encoding_dim, nn::HeadKind::Gaussian}, "enc",
                              rng);
    std::vector<Eigen::Index> mirrored(spec_.hidden_dims.rbegin(), spec_.hidden_dims.rend());
    decoder_ = nn::DenseStack({spec_.encoding_dim, mirrored, spec_.input_dim, nn::HeadKind::Gaussian}, "dec", rng);
}

std::vector<nn::Parameter*> DenseVae::parameters() {
    std::vector<nn::Parameter*> out;
    encoder_.collect(out);
    decoder_.collect(out);
    return out;
}

train::LossOutput DenseVae::loss(nn::Tape& tape, const Matrix& x, const std::vector<int>&, nn::Rng& noise) {
    std::normal_distribution<double> normal;
    Matrix eps(x.rows(), spec_.encoding_dim);
    for (Eigen::Index c = 0; c < eps.cols(); ++c) {
        for (Eigen::Index r = 0; r < eps.rows(); ++r) eps(r, c) = normal(noise);
    }
    nn::Var input = tape.constant(x);
    auto q = encoder_.forward_gaussian(tape, input);
    auto p = decoder_.forward_gaussian(tape, nn::reparameterize(q, tape.constant(std::move(eps))));
    nn::Var recon = nn::gaussian_log_prob_rows(input, p);
    nn::Var kl = nn::kl_standard_normal_rows(q);
    nn::Var total = nn::mean(nn::sub(kl, recon));
    const double r = recon.value().mean();
    const double k = kl.value().mean();
    if (!std::isfinite(total.value()(0, 0))) {
        throw DivergenceError("non-finite VAE objective: recon=" + std::to_string(r) + " kl=" + std::to_string(k));
    }
    return {total, {{"recon", r}, {"kl", k}}};
}

std::pair<Matrix, Matrix> DenseVae::encode(const Matrix& x) {
    require_width(x, spec_.input_dim, "dense VAE");
    nn::Tape tape(false);
    auto q = encoder_.forward_gaussian(tape, tape.constant(x));
    return {q.mean.value(), q.std.value()};
}

Vector DenseVae::score_with_noise(const Matrix& x, const std::vector<Matrix>& noise) {
    if (noise.empty()) throw ArgumentError("VAE scoring needs at least one sample");
    auto [mean, std] = encode(x);
    const Eigen::Index b = x.rows();
    const auto s = static_cast<Eigen::Index>(noise.size());
    Matrix z(b * s, spec_.encoding_dim);
    Matrix repeated(b * s, x.cols());
    for (Eigen::Index k = 0; k < s; ++k) {
        const Matrix& eps = noise[static_cast<std::size_t>(k)];
        if (eps.rows() != b || eps.cols() != spec_.encoding_dim) throw DimensionError("VAE noise shape mismatch");
        z.middleRows(k * b, b) = mean + std.cwiseProduct(eps);
        repeated.middleRows(k * b, b) = x;
    }
    nn::Tape tape(false);
    auto p = decoder_.forward_gaussian(tape, tape.constant(z));
    const Vector log_p = nn::gaussian_log_prob_rows(tape.constant(repeated), p).value().col(0);
    Vector out = Vector::Zero(b);
    for (Eigen::Index k = 0; k < s; ++k) out -= log_p.segment(k * b, b);
    return out / static_cast<double>(s);
}

Vector DenseVae::score(const Matrix& x, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ArgumentError("VAE scoring needs at least one sample");
    require_width(x, spec_.input_dim, "dense VAE");
    Vector out(x.rows());
    for (Eigen::Index start = 0; start < x.rows(); start += kVaeScoreChunk) {
        const Eigen::Index b = std::min(kVaeScoreChunk, x.rows() - start);
        std::vector<Matrix> noise(static_cast<std::size_t>(n_samples), Matrix(b, spec_.encoding_dim));
        for (Eigen::Index i = 0; i < b; ++i) {
            nn::Rng rng(row_seed(x, start + i, seed));
            std::normal_distribution<double> normal;
            for (auto& eps : noise) {
                for (Eigen::Index c = 0; c < spec_.encoding_dim; ++c) eps(i, c) = normal(rng);
            }
        }
        out.segment(start, b) = score_with_noise(x.middleRows(start, b), noise);
    }
    return out;
}

void DenseVae::save(const std::filesystem::path& path) { nn::save_checkpoint(path, parameters(), spec_.to_json()); }

DenseVae DenseVae::load(const std::filesystem::path& path) {
    const auto ck = nn::load_checkpoint(path);
    DenseVae m(AutoencoderSpec::from_json(ck.spec_json), 0);
    nn::restore_parameters(ck, m.parameters());
    return m;
}

}  // namespace divad::baselines
