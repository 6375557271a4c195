#include "nvgan/loss.hpp"

namespace nvgan {

NodePtr bce_loss(const NodePtr& predicted, int label) {
    if (label != 0 && label != 1) {
        throw ConfigError("bce_loss label must be 0 or 1, got " + std::to_string(label));
    }
    NodePtr term;
    if (label == 1) {
        term = log_clamped(predicted);
    } else {
        term = log_clamped(sub(make_leaf(Grid::scalar(1.0f)), predicted));
    }
    return scale(reduce_mean(term), -1.0f);
}

NodePtr discriminator_loss(const NodePtr& d_real, const NodePtr& d_fake) {
    if (!shape_equal(d_real->value.shape, d_fake->value.shape)) {
        throw ShapeError("discriminator_loss: real and fake batches differ, " +
                         shape_to_string(d_real->value.shape) + " vs " +
                         shape_to_string(d_fake->value.shape));
    }
    return add(bce_loss(d_real, 1), bce_loss(d_fake, 0));
}

NodePtr l1_mean(const NodePtr& a, const NodePtr& b) {
    require_same_shape(a->value, b->value, "l1_mean");
    return reduce_mean(abs_val(sub(a, b)));
}

NodePtr generator_loss(const NodePtr& d_fake, const NodePtr& y_true, const NodePtr& y_fake,
                       const LossConfig& cfg) {
    if (cfg.lambda1 < 0.0f || cfg.lambda2 < 0.0f || cfg.lambda1 + cfg.lambda2 <= 0.0f) {
        throw ConfigError("loss weights must be non-negative with lambda1 + lambda2 > 0");
    }
    require_same_shape(y_true->value, y_fake->value, "generator_loss");
    NodePtr adv = scale(bce_loss(d_fake, 1), cfg.lambda1);
    NodePtr rec = scale(l1_mean(y_true, y_fake), cfg.lambda2);
    return add(adv, rec);
}

}  // namespace nvgan
