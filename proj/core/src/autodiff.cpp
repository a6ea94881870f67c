#include "divad/autodiff.hpp"

#include <cmath>

#include "divad/error.hpp"

namespace divad::nn {
namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(op) + ": shapes " + shape(a.value()) + " and " + shape(b.value()) +
                             " differ");
    }
}

void require_same_tape(const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw ArgumentError("operands recorded on different tapes");
}

double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Unary elementwise op: forward f, local derivative df(x, y).
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
    Tape& tape = a.tape();
    Matrix y = a.value().unaryExpr(f);
    const int ia = a.id();
    return tape.record(std::move(y), {ia}, [ia, df](Tape& t, int self) {
        if (!t.needs_grad(ia)) return;
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(self);
        const Matrix& g = t.upstream(self);
        Matrix& ga = t.grad_ref(ia);
        for (Eigen::Index k = 0; k < x.size(); ++k) ga(k) += g(k) * df(x(k), y(k));
    });
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::record(Matrix value, const std::vector<int>& inputs, Backprop backprop) {
    Node node;
    node.value = std::move(value);
    for (int i : inputs) node.needs_grad = node.needs_grad || nodes_[static_cast<std::size_t>(i)].needs_grad;
    if (node.needs_grad) node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::initializer_list<int> inputs, Backprop backprop) {
    return record(std::move(value), std::vector<int>(inputs), std::move(backprop));
}

Var Tape::constant(Matrix value) {
    Node node;
    node.value = std::move(value);
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
    Node node;
    node.value = p.value;
    node.param = track_gradients_ ? &p : nullptr;
    node.needs_grad = track_gradients_;
    nodes_.push_back(std::move(node));
    const int id = static_cast<int>(nodes_.size() - 1);
    param_nodes_.emplace(&p, id);
    return Var(this, id);
}

Matrix& Tape::grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        n.grad.setZero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(const Var& root) {
    if (root.tape_ != this) throw ArgumentError("backward root belongs to another tape");
    if (root.rows() != 1 || root.cols() != 1) {
        throw DimensionError("backward root must be 1x1, got " + shape(root.value()));
    }
    for (auto& n : nodes_) n.has_grad = false;
    grad_ref(root.id_).setOnes();
    for (int id = root.id_; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.has_grad) continue;
        if (n.backprop) n.backprop(*this, id);
        if (n.param != nullptr) {
            if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
                n.param->grad.setZero(n.grad.rows(), n.grad.cols());
            }
            n.param->grad += n.grad;
        }
    }
}

Matrix Tape::grad(const Var& v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id_)];
    if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

// Linear algebra

Var matmul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions of " + shape(a.value()) + " and " + shape(b.value()) +
                             " differ");
    }
    const int ia = a.id(), ib = b.id();
    return a.tape().record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia).noalias() += g * t.value(ib).transpose();
        if (t.needs_grad(ib)) t.grad_ref(ib).noalias() += t.value(ia).transpose() * g;
    });
}

Var add(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape("add", a, b);
    const int ia = a.id(), ib = b.id();
    return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g;
        if (t.needs_grad(ib)) t.grad_ref(ib) += g;
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape("sub", a, b);
    const int ia = a.id(), ib = b.id();
    return a.tape().record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g;
        if (t.needs_grad(ib)) t.grad_ref(ib) -= g;
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape("mul", a, b);
    const int ia = a.id(), ib = b.id();
    return a.tape().record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g.cwiseProduct(t.value(ib));
        if (t.needs_grad(ib)) t.grad_ref(ib) += g.cwiseProduct(t.value(ia));
    });
}

Var div(const Var& a, const Var& b) {
    require_same_tape(a, b);
    require_same_shape("div", a, b);
    const int ia = a.id(), ib = b.id();
    return a.tape().record(a.value().cwiseQuotient(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        const Matrix& bv = t.value(ib);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g.cwiseQuotient(bv);
        if (t.needs_grad(ib)) t.grad_ref(ib) -= g.cwiseProduct(t.value(self)).cwiseQuotient(bv);
    });
}

Var add_row(const Var& a, const Var& row) {
    require_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + shape(row.value()));
    }
    const int ia = a.id(), ir = row.id();
    Matrix y = a.value().rowwise() + row.value().row(0);
    return a.tape().record(std::move(y), {ia, ir}, [ia, ir](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g;
        if (t.needs_grad(ir)) t.grad_ref(ir) += g.colwise().sum();
    });
}

Var mul_row(const Var& a, const Var& row) {
    require_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError("mul_row: expected 1x" + std::to_string(a.cols()) + " row, got " + shape(row.value()));
    }
    const int ia = a.id(), ir = row.id();
    Matrix y = a.value().array().rowwise() * row.value().row(0).array();
    return a.tape().record(std::move(y), {ia, ir}, [ia, ir](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia).array() += g.array().rowwise() * t.value(ir).row(0).array();
        if (t.needs_grad(ir)) t.grad_ref(ir) += g.cwiseProduct(t.value(ia)).colwise().sum();
    });
}

Var add_col(const Var& a, const Var& col) {
    require_same_tape(a, col);
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw DimensionError("add_col: expected " + std::to_string(a.rows()) + "x1 column, got " + shape(col.value()));
    }
    const int ia = a.id(), ic = col.id();
    Matrix y = a.value().colwise() + col.value().col(0);
    return a.tape().record(std::move(y), {ia, ic}, [ia, ic](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        if (t.needs_grad(ia)) t.grad_ref(ia) += g;
        if (t.needs_grad(ic)) t.grad_ref(ic) += g.rowwise().sum();
    });
}

Var scale(const Var& a, double factor) {
    const int ia = a.id();
    return a.tape().record(a.value() * factor, {ia}, [ia, factor](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia) += t.upstream(self) * factor;
    });
}

Var add_scalar(const Var& a, double offset) {
    const int ia = a.id();
    return a.tape().record(a.value().array() + offset, {ia}, [ia](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia) += t.upstream(self);
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

// Activations

Var relu(const Var& a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a) {
    return unary(
        a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
        [](double x, double) { return sigmoid_scalar(x); });
}

Var tanh(const Var& a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
    return unary(a, [](double x) { return sigmoid_scalar(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var reciprocal(const Var& a) {
    return unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

// Reductions

Var sum(const Var& a) {
    const int ia = a.id();
    Matrix y(1, 1);
    y(0, 0) = a.value().sum();
    return a.tape().record(std::move(y), {ia}, [ia](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia).array() += t.upstream(self)(0, 0);
    });
}

Var mean(const Var& a) {
    const auto n = static_cast<double>(a.value().size());
    if (n == 0) throw EmptyInputError("mean of an empty matrix");
    return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
    const int ia = a.id();
    return a.tape().record(a.value().rowwise().sum(), {ia}, [ia](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia).colwise() += t.upstream(self).col(0);
    });
}

Var logsumexp_rows(const Var& a) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix y(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        y(r, 0) = std::isinf(m) ? m : m + std::log((x.row(r).array() - m).exp().sum());
    }
    return a.tape().record(std::move(y), {ia}, [ia](Tape& t, int self) {
        if (!t.needs_grad(ia)) return;
        const Matrix& x = t.value(ia);
        const Matrix& y = t.value(self);
        const Matrix& g = t.upstream(self);
        Matrix& ga = t.grad_ref(ia);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            ga.row(r).array() += g(r, 0) * (x.row(r).array() - y(r, 0)).exp();
        }
    });
}

Var log_softmax_rows(const Var& a) {
    const int ia = a.id();
    const Matrix& x = a.value();
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        const double lse = m + std::log((x.row(r).array() - m).exp().sum());
        y.row(r) = x.row(r).array() - lse;
    }
    return a.tape().record(std::move(y), {ia}, [ia](Tape& t, int self) {
        if (!t.needs_grad(ia)) return;
        const Matrix& y = t.value(self);
        const Matrix& g = t.upstream(self);
        Matrix& ga = t.grad_ref(ia);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double gs = g.row(r).sum();
            ga.row(r).array() += g.row(r).array() - y.row(r).array().exp() * gs;
        }
    });
}

Var pick(const Var& a, const std::vector<int>& index) {
    const Matrix& x = a.value();
    if (static_cast<Eigen::Index>(index.size()) != x.rows()) {
        throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " + std::to_string(x.rows()) +
                             " rows");
    }
    Matrix y(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const int c = index[static_cast<std::size_t>(r)];
        if (c < 0 || c >= x.cols()) {
            throw IndexError("pick: index " + std::to_string(c) + " outside [0, " + std::to_string(x.cols()) + ")");
        }
        y(r, 0) = x(r, c);
    }
    const int ia = a.id();
    return a.tape().record(std::move(y), {ia}, [ia, index](Tape& t, int self) {
        if (!t.needs_grad(ia)) return;
        const Matrix& g = t.upstream(self);
        Matrix& ga = t.grad_ref(ia);
        for (Eigen::Index r = 0; r < g.rows(); ++r) ga(r, index[static_cast<std::size_t>(r)]) += g(r, 0);
    });
}

// Reshaping

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw EmptyInputError("concat_cols of nothing");
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    std::vector<int> ids;
    std::vector<Eigen::Index> widths;
    for (const auto& p : parts) {
        require_same_tape(parts.front(), p);
        if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
        cols += p.cols();
        ids.push_back(p.id());
        widths.push_back(p.cols());
    }
    Matrix y(rows, cols);
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
        y.middleCols(offset, p.cols()) = p.value();
        offset += p.cols();
    }
    return parts.front().tape().record(std::move(y), ids, [ids, widths](Tape& t, int self) {
        const Matrix& g = t.upstream(self);
        Eigen::Index off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (t.needs_grad(ids[k])) t.grad_ref(ids[k]) += g.middleCols(off, widths[k]);
            off += widths[k];
        }
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") outside " + std::to_string(a.cols()) + " columns");
    }
    const int ia = a.id();
    return a.tape().record(a.value().middleCols(start, count), {ia}, [ia, start, count](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia).middleCols(start, count) += t.upstream(self);
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") outside " + std::to_string(a.rows()) + " rows");
    }
    const int ia = a.id();
    return a.tape().record(a.value().middleRows(start, count), {ia}, [ia, start, count](Tape& t, int self) {
        if (t.needs_grad(ia)) t.grad_ref(ia).middleRows(start, count) += t.upstream(self);
    });
}

Matrix softplus(const Matrix& x) {
    return x.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
}

double softplus_inverse(double y) {
    if (y <= 0) throw ArgumentError("softplus_inverse needs a positive argument");
    return y > 30.0 ? y : std::log(std::expm1(y));
}

}  // namespace divad::nn
