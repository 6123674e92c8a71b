#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcgpt/tensor.hpp"

namespace pcgpt::num {

/// Linear warmup multiplier on the base learning rate: ramps 0 -> 1 over
/// warmup_steps, then stays at 1.
inline double lr_multiplier(int step, int warmup_steps) {
    if (warmup_steps < 1) throw std::invalid_argument("lr_multiplier: warmup_steps must be >= 1");
    return std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup_steps));
}

struct AdamWConfig {
    double lr_base = 1e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// AdamW with decoupled weight decay and bias correction. Moments are kept in
/// double regardless of the parameter scalar type. Gradients are zeroed after
/// each step.
template <class S>
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    int step_count() const { return step_; }

    void step(std::vector<Tensor<S>>& params, double lr_mult = 1.0) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].value().size(), 0.0);
                v_[i].assign(params[i].value().size(), 0.0);
            }
        }
        if (m_.size() != params.size())
            throw std::invalid_argument("AdamW::step: parameter count changed");

        ++step_;
        const double lr = cfg_.lr_base * lr_mult;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, step_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, step_);
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<S>& p = params[i];
            if (!p.requires_grad()) continue;
            if (p.node()->grad.size() != p.value().size())
                throw std::invalid_argument("AdamW::step: parameter has no gradient");
            auto& value = p.value();
            auto& grad = p.node()->grad;
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < value.size(); ++j) {
                const double g = static_cast<double>(grad[j]);
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                const double p_old = static_cast<double>(value[j]);
                value[j] = static_cast<S>(p_old - lr * (mhat / (std::sqrt(vhat) + cfg_.eps)) -
                                          lr * cfg_.weight_decay * p_old);
                grad[j] = S(0);
            }
        }
    }

private:
    AdamWConfig cfg_;
    int step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace pcgpt::num
