#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "nvgan/grid.hpp"
#include "nvgan/rng.hpp"

namespace nvgan {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode tape. Interior nodes keep shared ownership of
// their parents, so a graph stays alive as long as its root does.
struct Node {
    Grid value;
    Grid grad;  // empty until first needed; always value-shaped once allocated
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;

    bool has_grad() const { return !grad.data.empty(); }
    void ensure_grad();
    void zero_grad();
    void detach_graph() {
        parents.clear();
        backward_fn = nullptr;
    }
};

NodePtr make_leaf(Grid value, bool requires_grad = false);
NodePtr make_param(Grid value);  // leaf with requires_grad = true

// Returns a gradient-free leaf sharing the node's current value.
NodePtr detach(const NodePtr& node);

// While alive, newly built nodes record no tape (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// ---- elementwise ----
// Binary ops accept equal shapes plus two broadcast forms: a 1-element scalar
// against any grid, and a Bx C x1x1 grid against a BxCxHxW grid.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, float factor);
NodePtr sigmoid(const NodePtr& a);
NodePtr tanh_act(const NodePtr& a);
NodePtr relu(const NodePtr& a);
NodePtr leaky_relu(const NodePtr& a, float slope = 0.2f);
NodePtr log_clamped(const NodePtr& a);  // clamps the argument to >= 1e-12
NodePtr abs_val(const NodePtr& a);

// ---- reductions ----
NodePtr reduce_sum(const NodePtr& a);
NodePtr reduce_mean(const NodePtr& a);
// BxCxHxW -> BxCx1x1, gradient spread uniformly over each channel plane.
NodePtr global_avg_pool(const NodePtr& a);

// ---- structure ----
NodePtr concat_channels(const NodePtr& a, const NodePtr& b);
NodePtr reshape(const NodePtr& a, Shape target);

// ---- linear maps ----
// input BxF, weight GxF, bias G -> BxG
NodePtr dense(const NodePtr& input, const NodePtr& weight, const NodePtr& bias);
// input BxCxHxW, kernel OxCxKhxKw, bias O. H' = (H + 2p - Kh)/s + 1.
NodePtr conv2d(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
               int stride, int padding);
// Adjoint geometry: input BxOxHxW with kernel OxCxKhxKw maps to BxCxH'xW'
// where H' = (H-1)*s - 2p + Kh.
NodePtr conv2d_transpose(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
                         int stride, int padding);

// Corner-aligned bilinear interpolation; target extents must be >= source.
NodePtr bilinear_upsample(const NodePtr& a, int64_t target_rows, int64_t target_cols);

// ---- stateful layers ----
// Per-channel batch statistics normalization. In training mode the batch mean
// and (biased) variance normalize, and running statistics are updated in place
// with the given momentum. In inference mode the running statistics normalize.
NodePtr batch_norm(const NodePtr& input, const NodePtr& gamma, const NodePtr& beta,
                   Grid& running_mean, Grid& running_var, bool training,
                   float momentum = 0.1f, float eps = 1e-5f);

// Inverted dropout; identity when not training.
NodePtr dropout(const NodePtr& input, float rate, Pcg32& rng, bool training);

// ---- backward ----
// Seeds the scalar root with 1 and propagates. Interior gradients are rebuilt
// per call; leaf gradients accumulate until zero_grad, so repeated backward
// calls sum their contributions.
void backward(const NodePtr& root);

void zero_grads(std::span<const NodePtr> params);

// Forward-only value helpers used outside the graph (data pipeline, tests).
Grid bilinear_resize_value(const Grid& chw_or_hw, int64_t target_rows, int64_t target_cols);

}  // namespace nvgan
