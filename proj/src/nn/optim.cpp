#include "cellseg/nn/optim.hpp"

#include <cmath>

namespace cellseg::nn {

Adam::Adam(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Var& p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape));
        v_.push_back(Tensor::zeros(p->value.shape));
    }
}

void Adam::zero_grad() {
    for (const Var& p : params_) {
        if (!p->grad.data.empty()) p->grad.fill(0.0);
    }
}

void Adam::step(double learning_rate) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Var& p = params_[i];
        if (p->grad.data.empty()) continue;
        for (long j = 0; j < p->value.numel(); ++j) {
            double g = p->grad.data[j];
            m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
            v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
            double mhat = m_[i].data[j] / bc1;
            double vhat = v_[i].data[j] / bc2;
            p->value.data[j] -= learning_rate * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace cellseg::nn
