#pragma once

#include <span>
#include <vector>

#include "nvgan/autodiff.hpp"

namespace nvgan {

struct AdamConfig {
    float lr = 0.001f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Bias-corrected Adam with per-parameter first/second moments.
class AdamState {
public:
    AdamState() = default;
    AdamState(AdamConfig cfg, std::span<const NodePtr> params);

    // Applies one update in place. Every tracked parameter must hold a
    // gradient; t increments exactly once per call.
    void step(std::span<const NodePtr> params);

    const AdamConfig& config() const { return cfg_; }
    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::vector<Grid>& first_moments() { return m_; }
    std::vector<Grid>& second_moments() { return v_; }

private:
    AdamConfig cfg_;
    std::vector<Grid> m_, v_;
    int64_t t_ = 0;
};

}  // namespace nvgan
