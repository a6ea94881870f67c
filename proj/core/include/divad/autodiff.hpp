#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace divad::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A trainable array with its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    [[nodiscard]] Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
public:
    Var() = default;

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
    [[nodiscard]] Tape& tape() const { return *tape_; }
    [[nodiscard]] int id() const { return id_; }
    [[nodiscard]] bool valid() const { return tape_ != nullptr; }

private:
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
    friend class Tape;
};

/// Records matrix operations and back-propagates gradients into Parameters.
///
/// Rows are batch items throughout. A Tape is single-use: build a graph,
/// call backward() once, discard.
class Tape {
public:
    using Backprop = std::function<void(Tape&, int)>;

    /// With `track_gradients` false, parameters enter as constants and no
    /// backward closures are kept (inference).
    explicit Tape(bool track_gradients = true) : track_gradients_(track_gradients) { nodes_.reserve(256); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Leaf bound to `p`; repeated calls with the same parameter return the same node.
    Var parameter(Parameter& p);

    /// Back-propagates from a 1x1 node, accumulating into Parameter::grad.
    void backward(const Var& root);

    /// Gradient of the last backward() root with respect to `v` (zeros if unreached).
    [[nodiscard]] Matrix grad(const Var& v) const;

    // Building blocks for operations.
    Var record(Matrix value, std::initializer_list<int> inputs, Backprop backprop);
    Var record(Matrix value, const std::vector<int>& inputs, Backprop backprop);
    [[nodiscard]] const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    [[nodiscard]] const Matrix& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    [[nodiscard]] bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    Matrix& grad_ref(int id);

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backprop backprop;
        Parameter* param = nullptr;
        bool needs_grad = false;
        bool has_grad = false;
    };
    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> param_nodes_;
    bool track_gradients_ = true;
};

// Elementwise and linear-algebra operations. Shapes are checked and a
// DimensionError names expected and actual shapes on mismatch.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // a (R x C) + row (1 x C) broadcast
Var mul_row(const Var& a, const Var& row);  // a (R x C) * row (1 x C) broadcast
Var add_col(const Var& a, const Var& col);  // a (R x C) + col (R x 1) broadcast
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var neg(const Var& a);

Var relu(const Var& a);
Var softplus(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var reciprocal(const Var& a);

Var sum(const Var& a);       // 1 x 1
Var mean(const Var& a);      // 1 x 1
Var row_sum(const Var& a);   // R x 1
Var logsumexp_rows(const Var& a);  // R x 1
Var log_softmax_rows(const Var& a);
/// out(r) = a(r, index[r]).
Var pick(const Var& a, const std::vector<int>& index);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

/// Numerically stable softplus on plain matrices.
Matrix softplus(const Matrix& x);
/// Inverse of softplus for positive inputs.
double softplus_inverse(double y);

}  // namespace divad::nn
