#include "divad/layers.hpp"

#include <cmath>

#include "divad/error.hpp"

namespace divad::nn {
namespace {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
    }
    return m;
}

void require_cols(const char* what, const Var& x, Eigen::Index expected) {
    if (x.cols() != expected) {
        throw DimensionError(std::string(what) + ": expected input width " + std::to_string(expected) + ", got " +
                             std::to_string(x.cols()));
    }
}

}  // namespace

Var activate(const Var& x, Activation activation) {
    switch (activation) {
        case Activation::Relu: return relu(x);
        case Activation::Tanh: return tanh(x);
        case Activation::Identity: return x;
    }
    return x;
}

// Linear

Linear::Linear(Eigen::Index in, Eigen::Index out, const std::string& name, Rng& rng)
    : weight_(name + ".weight", uniform_init(in, out, in, rng)), bias_(name + ".bias", Matrix::Zero(1, out)) {
    if (in < 1 || out < 1) throw ArgumentError(name + ": layer dimensions must be positive");
}

Var Linear::forward(Tape& tape, const Var& x) {
    require_cols(weight_.name.c_str(), x, in_dim());
    return add_row(matmul(x, tape.parameter(weight_)), tape.parameter(bias_));
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// GaussianHead

GaussianHead::GaussianHead(Eigen::Index in, Eigen::Index out, const std::string& name, Rng& rng)
    : mean_(in, out, name + ".mean", rng), std_(in, out, name + ".std", rng) {}

GaussianVars GaussianHead::forward(Tape& tape, const Var& x) {
    return {mean_.forward(tape, x), add_scalar(softplus(std_.forward(tape, x)), kStdEpsilon)};
}

void GaussianHead::collect(std::vector<Parameter*>& out) {
    mean_.collect(out);
    std_.collect(out);
}

// DenseStack

void DenseStackSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ArgumentError("dense stack dimensions must be positive");
    for (auto h : hidden_dims) {
        if (h < 1) throw ArgumentError("dense stack hidden sizes must be positive");
    }
}

DenseStack::DenseStack(DenseStackSpec spec, const std::string& name, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    Eigen::Index width = spec_.input_dim;
    for (std::size_t i = 0; i < spec_.hidden_dims.size(); ++i) {
        hidden_.emplace_back(width, spec_.hidden_dims[i], name + ".hidden" + std::to_string(i), rng);
        width = spec_.hidden_dims[i];
    }
    if (spec_.head == HeadKind::Gaussian) {
        gaussian_ = GaussianHead(width, spec_.output_dim, name + ".head", rng);
    } else {
        linear_ = Linear(width, spec_.output_dim, name + ".head", rng);
    }
}

Var DenseStack::trunk(Tape& tape, const Var& x) {
    require_cols("dense stack", x, spec_.input_dim);
    Var h = x;
    for (auto& layer : hidden_) h = activate(layer.forward(tape, h), spec_.activation);
    return h;
}

GaussianVars DenseStack::forward_gaussian(Tape& tape, const Var& x) {
    if (spec_.head != HeadKind::Gaussian) throw StateError("dense stack has no Gaussian head");
    return gaussian_.forward(tape, trunk(tape, x));
}

Var DenseStack::forward(Tape& tape, const Var& x) {
    if (spec_.head == HeadKind::Gaussian) throw StateError("dense stack has a Gaussian head; use forward_gaussian");
    return activate(linear_.forward(tape, trunk(tape, x)), spec_.output_activation);
}

void DenseStack::collect(std::vector<Parameter*>& out) {
    for (auto& layer : hidden_) layer.collect(out);
    if (spec_.head == HeadKind::Gaussian) {
        gaussian_.collect(out);
    } else {
        linear_.collect(out);
    }
}

// Gru

Gru::Gru(Eigen::Index in, Eigen::Index units, const std::string& name, Rng& rng)
    : units_(units),
      input_gates_(in, 3 * units, name + ".input", rng),
      recurrent_zr_(name + ".recurrent_zr", uniform_init(units, 2 * units, units, rng)),
      recurrent_h_(name + ".recurrent_h", uniform_init(units, units, units, rng)) {}

std::vector<Var> Gru::forward(Tape& tape, const std::vector<Var>& steps) {
    if (steps.empty()) throw EmptyInputError("GRU over zero steps");
    const Eigen::Index batch = steps.front().rows();
    Var h = tape.constant(Matrix::Zero(batch, units_));
    Var u_zr = tape.parameter(recurrent_zr_);
    Var u_h = tape.parameter(recurrent_h_);
    std::vector<Var> outputs;
    outputs.reserve(steps.size());
    for (const Var& x : steps) {
        Var xg = input_gates_.forward(tape, x);
        Var hzr = matmul(h, u_zr);
        Var z = sigmoid(add(slice_cols(xg, 0, units_), slice_cols(hzr, 0, units_)));
        Var r = sigmoid(add(slice_cols(xg, units_, units_), slice_cols(hzr, units_, units_)));
        Var candidate = tanh(add(slice_cols(xg, 2 * units_, units_), matmul(mul(r, h), u_h)));
        h = add(candidate, mul(z, sub(h, candidate)));
        outputs.push_back(h);
    }
    return outputs;
}

void Gru::collect(std::vector<Parameter*>& out) {
    input_gates_.collect(out);
    out.push_back(&recurrent_zr_);
    out.push_back(&recurrent_h_);
}

// Conv1d

Conv1d::Conv1d(Eigen::Index in_channels, Eigen::Index filters, Eigen::Index kernel, Eigen::Index stride,
               const std::string& name, Rng& rng)
    : kernel_(kernel), stride_(stride), taps_(kernel * in_channels, filters, name + ".taps", rng) {
    if (kernel < 1 || stride < 1) throw ArgumentError(name + ": kernel and stride must be positive");
}

Eigen::Index Conv1d::output_length(Eigen::Index input_length) const {
    if (kernel_ > input_length) {
        throw DimensionError("conv kernel " + std::to_string(kernel_) + " exceeds sequence length " +
                             std::to_string(input_length));
    }
    return (input_length - kernel_) / stride_ + 1;
}

std::vector<Var> Conv1d::forward(Tape& tape, const std::vector<Var>& steps, Activation activation) {
    const auto out_len = output_length(static_cast<Eigen::Index>(steps.size()));
    std::vector<Var> outputs;
    outputs.reserve(static_cast<std::size_t>(out_len));
    for (Eigen::Index t = 0; t < out_len; ++t) {
        std::vector<Var> receptive(steps.begin() + t * stride_, steps.begin() + t * stride_ + kernel_);
        outputs.push_back(activate(taps_.forward(tape, concat_cols(receptive)), activation));
    }
    return outputs;
}

void Conv1d::collect(std::vector<Parameter*>& out) { taps_.collect(out); }

// ConvTranspose1d

ConvTranspose1d::ConvTranspose1d(Eigen::Index in_channels, Eigen::Index filters, Eigen::Index kernel,
                                 Eigen::Index stride, const std::string& name, Rng& rng)
    : kernel_(kernel),
      stride_(stride),
      filters_(filters),
      weight_(name + ".weight", uniform_init(in_channels, kernel * filters, in_channels * kernel / std::max<Eigen::Index>(stride, 1), rng)),
      bias_(name + ".bias", Matrix::Zero(1, filters)) {
    if (kernel < 1 || stride < 1) throw ArgumentError(name + ": kernel and stride must be positive");
}

std::vector<Var> ConvTranspose1d::forward(Tape& tape, const std::vector<Var>& steps, Eigen::Index output_length,
                                          Activation activation) {
    if (steps.empty()) throw EmptyInputError("transposed convolution over zero steps");
    const auto in_len = static_cast<Eigen::Index>(steps.size());
    const Eigen::Index natural = (in_len - 1) * stride_ + kernel_;
    if (output_length < natural) {
        throw DimensionError("transposed convolution output length " + std::to_string(output_length) +
                             " shorter than natural length " + std::to_string(natural));
    }
    Var w = tape.parameter(weight_);
    Var b = tape.parameter(bias_);
    std::vector<std::vector<Var>> contributions(static_cast<std::size_t>(output_length));
    for (Eigen::Index t = 0; t < in_len; ++t) {
        Var y = matmul(steps[static_cast<std::size_t>(t)], w);
        for (Eigen::Index j = 0; j < kernel_; ++j) {
            contributions[static_cast<std::size_t>(t * stride_ + j)].push_back(slice_cols(y, j * filters_, filters_));
        }
    }
    const Eigen::Index batch = steps.front().rows();
    std::vector<Var> outputs;
    outputs.reserve(static_cast<std::size_t>(output_length));
    for (auto& parts : contributions) {
        Var acc = parts.empty() ? tape.constant(Matrix::Zero(batch, filters_)) : parts.front();
        for (std::size_t k = 1; k < parts.size(); ++k) acc = add(acc, parts[k]);
        outputs.push_back(activate(add_row(acc, b), activation));
    }
    return outputs;
}

void ConvTranspose1d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// Recurrent encoder / decoder

Eigen::Index RecurrentEncoderSpec::latent_length() const { return (window_length - conv_kernel) / conv_stride + 1; }

void RecurrentEncoderSpec::validate() const {
    if (window_length < 1 || n_features < 1 || conv_filters < 1 || gru_units < 1 || output_dim < 1 ||
        conv_stride < 1 || conv_kernel < 1) {
        throw ArgumentError("recurrent encoder dimensions must be positive");
    }
    if (conv_kernel > window_length) {
        throw ArgumentError("conv kernel " + std::to_string(conv_kernel) + " exceeds window length " +
                            std::to_string(window_length));
    }
}

RecurrentEncoder::RecurrentEncoder(RecurrentEncoderSpec spec, const std::string& name, Rng& rng)
    : spec_(spec) {
    spec_.validate();
    conv_ = Conv1d(spec_.n_features, spec_.conv_filters, spec_.conv_kernel, spec_.conv_stride, name + ".conv", rng);
    gru_ = Gru(spec_.conv_filters, spec_.gru_units, name + ".gru", rng);
    head_ = GaussianHead(spec_.gru_units, spec_.output_dim, name + ".head", rng);
}

GaussianVars RecurrentEncoder::forward_gaussian(Tape& tape, const Var& x) {
    require_cols("recurrent encoder", x, spec_.window_length * spec_.n_features);
    auto steps = split_steps(x, spec_.window_length, spec_.n_features);
    auto features = conv_.forward(tape, steps, Activation::Relu);
    auto hidden = gru_.forward(tape, features);
    return head_.forward(tape, hidden.back());
}

void RecurrentEncoder::collect(std::vector<Parameter*>& out) {
    conv_.collect(out);
    gru_.collect(out);
    head_.collect(out);
}

Eigen::Index RecurrentDecoderSpec::latent_length() const { return (window_length - conv_kernel) / conv_stride + 1; }

void RecurrentDecoderSpec::validate() const {
    RecurrentEncoderSpec{window_length, n_features, conv_filters, conv_kernel, conv_stride, gru_units, input_dim}
        .validate();
}

RecurrentDecoder::RecurrentDecoder(RecurrentDecoderSpec spec, const std::string& name, Rng& rng) : spec_(spec) {
    spec_.validate();
    gru_ = Gru(spec_.input_dim, spec_.gru_units, name + ".gru", rng);
    deconv_ = ConvTranspose1d(spec_.gru_units, spec_.conv_filters, spec_.conv_kernel, spec_.conv_stride,
                              name + ".deconv", rng);
    head_ = GaussianHead(spec_.conv_filters, spec_.n_features, name + ".head", rng);
}

GaussianVars RecurrentDecoder::forward_gaussian(Tape& tape, const Var& z) {
    require_cols("recurrent decoder", z, spec_.input_dim);
    const std::vector<Var> repeated(static_cast<std::size_t>(spec_.latent_length()), z);
    auto hidden = gru_.forward(tape, repeated);
    auto restored = deconv_.forward(tape, hidden, spec_.window_length, Activation::Relu);
    std::vector<Var> means;
    std::vector<Var> stds;
    for (const Var& step : restored) {
        auto g = head_.forward(tape, step);
        means.push_back(g.mean);
        stds.push_back(g.std);
    }
    return {concat_cols(means), concat_cols(stds)};
}

void RecurrentDecoder::collect(std::vector<Parameter*>& out) {
    gru_.collect(out);
    deconv_.collect(out);
    head_.collect(out);
}

// GaussianNetwork

GaussianVars GaussianNetwork::forward(Tape& tape, const Var& x) {
    return std::visit([&](auto& net) { return net.forward_gaussian(tape, x); }, net_);
}

void GaussianNetwork::collect(std::vector<Parameter*>& out) {
    std::visit([&](auto& net) { net.collect(out); }, net_);
}

Eigen::Index GaussianNetwork::input_dim() const {
    return std::visit(
        [](const auto& net) -> Eigen::Index {
            using T = std::decay_t<decltype(net)>;
            if constexpr (std::is_same_v<T, DenseStack>) {
                return net.spec().input_dim;
            } else if constexpr (std::is_same_v<T, RecurrentEncoder>) {
                return net.spec().window_length * net.spec().n_features;
            } else {
                return net.spec().input_dim;
            }
        },
        net_);
}

Eigen::Index GaussianNetwork::output_dim() const {
    return std::visit(
        [](const auto& net) -> Eigen::Index {
            using T = std::decay_t<decltype(net)>;
            if constexpr (std::is_same_v<T, DenseStack>) {
                return net.spec().output_dim;
            } else if constexpr (std::is_same_v<T, RecurrentEncoder>) {
                return net.spec().output_dim;
            } else {
                return net.spec().window_length * net.spec().n_features;
            }
        },
        net_);
}

std::vector<Var> split_steps(const Var& flat, Eigen::Index window_length, Eigen::Index n_features) {
    require_cols("split_steps", flat, window_length * n_features);
    std::vector<Var> steps;
    steps.reserve(static_cast<std::size_t>(window_length));
    for (Eigen::Index t = 0; t < window_length; ++t) steps.push_back(slice_cols(flat, t * n_features, n_features));
    return steps;
}

Var reparameterize(const GaussianVars& g, const Var& noise) {
    if (noise.rows() != g.mean.rows() || noise.cols() != g.mean.cols()) {
        throw DimensionError("reparameterize: noise shape differs from the mean's");
    }
    return add(g.mean, mul(g.std, noise));
}

}  // namespace divad::nn
