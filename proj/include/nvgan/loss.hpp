#pragma once

#include "nvgan/autodiff.hpp"

namespace nvgan {

struct LossConfig {
    float lambda1 = 1.0f;   // adversarial weight
    float lambda2 = 100.0f; // L1 reconstruction weight
};

// -(1/N) sum [a log p + (1-a) log(1-p)] with a uniform 0/1 label.
NodePtr bce_loss(const NodePtr& predicted, int label);

// bce(d_real, 1) + bce(d_fake, 0)
NodePtr discriminator_loss(const NodePtr& d_real, const NodePtr& d_fake);

// Per-element mean absolute difference.
NodePtr l1_mean(const NodePtr& a, const NodePtr& b);

// lambda1 * bce(d_fake, 1) + lambda2 * mean|y_true - y_fake|
NodePtr generator_loss(const NodePtr& d_fake, const NodePtr& y_true, const NodePtr& y_fake,
                       const LossConfig& cfg);

}  // namespace nvgan
