#include "nvgan/adam.hpp"

#include <cmath>

namespace nvgan {

AdamState::AdamState(AdamConfig cfg, std::span<const NodePtr> params) : cfg_(cfg) {
    if (cfg.lr <= 0.0f) throw ConfigError("adam: learning rate must be positive");
    if (cfg.beta1 < 0.0f || cfg.beta1 >= 1.0f || cfg.beta2 < 0.0f || cfg.beta2 >= 1.0f) {
        throw ConfigError("adam: betas must lie in [0,1)");
    }
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void AdamState::step(std::span<const NodePtr> params) {
    if (params.size() != m_.size()) {
        throw StateError("adam: parameter list does not match the tracked moments");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        Node& p = *params[i];
        if (!p.has_grad()) {
            throw StateError("adam: missing gradient for tracked parameter " + std::to_string(i));
        }
        Grid& m = m_[i];
        Grid& v = v_[i];
        const int64_t n = p.value.size();
        for (int64_t j = 0; j < n; ++j) {
            const float g = p.grad[j];
            m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g;
            v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g * g;
            const float m_hat = static_cast<float>(m[j] / bc1);
            const float v_hat = static_cast<float>(v[j] / bc2);
            p.value[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        }
    }
}

}  // namespace nvgan
