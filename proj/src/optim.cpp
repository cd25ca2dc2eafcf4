#include "vague/optim.hpp"

#include <cmath>

namespace vague::nn {

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Var& p : params_) {
        m_.push_back(Tensor::zeros(p.shape()));
        v_.push_back(Tensor::zeros(p.shape()));
    }
}

void Adam::step() {
    ++t_;
    double c1 = 1.0 - std::pow(beta1_, t_);
    double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Var p = params_[pi];
        p.node()->ensure_grad();
        const Tensor& g = p.grad();
        Tensor& val = p.mutable_value();
        for (std::size_t i = 0; i < val.size(); ++i) {
            m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g[i];
            v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m_[pi][i] / c1;
            double vhat = v_[pi][i] / c2;
            val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() { zero_grads(params_); }

} // namespace vague::nn
