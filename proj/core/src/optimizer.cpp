#include "divad/optimizer.hpp"

#include <cmath>

#include "divad/error.hpp"

namespace divad::nn {

void AdamW::step(const std::vector<Parameter*>& params) {
    if (m_.empty()) {
        for (auto* p : params) {
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (m_.size() != params.size()) throw StateError("optimizer parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * config_.weight_decay * p.value.array();
        p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
    }
}

}  // namespace divad::nn
