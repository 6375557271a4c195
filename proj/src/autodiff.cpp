#include "nvgan/autodiff.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace nvgan {

namespace {

thread_local bool g_grad_enabled = true;

bool any_requires_grad(std::span<const NodePtr> nodes) {
    for (const auto& n : nodes) {
        if (n && n->requires_grad) return true;
    }
    return false;
}

NodePtr node_from(Grid value, const char* op, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = op;
    if (g_grad_enabled && any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

// ---- broadcasting ----

enum class Bcast { same, a_scalar, b_scalar, a_channel, b_channel };

bool is_channel_form(const Shape& small, const Shape& big) {
    return small.size() == 4 && big.size() == 4 && small[0] == big[0] &&
           small[1] == big[1] && small[2] == 1 && small[3] == 1 &&
           (big[2] > 1 || big[3] > 1);
}

Bcast classify_broadcast(const Grid& a, const Grid& b, const char* what) {
    if (shape_equal(a.shape, b.shape)) return Bcast::same;
    if (b.is_scalar()) return Bcast::b_scalar;
    if (a.is_scalar()) return Bcast::a_scalar;
    if (is_channel_form(b.shape, a.shape)) return Bcast::b_channel;
    if (is_channel_form(a.shape, b.shape)) return Bcast::a_channel;
    throw ShapeError(std::string(what) + ": incompatible shapes " + shape_to_string(a.shape) +
                     " vs " + shape_to_string(b.shape));
}

// Accumulates a per-output-element contribution into a gradient grid that is
// either output-shaped, scalar, or BxCx1x1 against a 4-D output.
template <typename ContribFn>
void accumulate_reduced(Grid& dst, const Shape& out_shape, int64_t out_numel, ContribFn contrib) {
    if (shape_equal(dst.shape, out_shape)) {
        for (int64_t i = 0; i < out_numel; ++i) dst[i] += contrib(i);
    } else if (dst.size() == 1) {
        double acc = 0.0;
        for (int64_t i = 0; i < out_numel; ++i) acc += contrib(i);
        dst[0] += static_cast<float>(acc);
    } else {
        const int64_t plane = out_shape[2] * out_shape[3];
        for (int64_t p = 0; p < dst.size(); ++p) {
            double acc = 0.0;
            const int64_t base = p * plane;
            for (int64_t s = 0; s < plane; ++s) acc += contrib(base + s);
            dst[p] += static_cast<float>(acc);
        }
    }
}

template <typename BinFn>
Grid binary_forward(const Grid& a, const Grid& b, Bcast kind, BinFn f) {
    const Grid& big = (kind == Bcast::a_scalar || kind == Bcast::a_channel) ? b : a;
    Grid out(big.shape);
    const int64_t n = out.size();
    switch (kind) {
        case Bcast::same:
            for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
            break;
        case Bcast::b_scalar: {
            const float bv = b[0];
            for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], bv);
            break;
        }
        case Bcast::a_scalar: {
            const float av = a[0];
            for (int64_t i = 0; i < n; ++i) out[i] = f(av, b[i]);
            break;
        }
        case Bcast::b_channel: {
            const int64_t plane = a.shape[2] * a.shape[3];
            for (int64_t i = 0; i < n; ++i) out[i] = f(a[i], b[i / plane]);
            break;
        }
        case Bcast::a_channel: {
            const int64_t plane = b.shape[2] * b.shape[3];
            for (int64_t i = 0; i < n; ++i) out[i] = f(a[i / plane], b[i]);
            break;
        }
    }
    return out;
}

float broadcast_pick(const Grid& g, Bcast kind, bool is_a, int64_t i, int64_t plane) {
    switch (kind) {
        case Bcast::same:
            return g[i];
        case Bcast::a_scalar:
            return is_a ? g[0] : g[i];
        case Bcast::b_scalar:
            return is_a ? g[i] : g[0];
        case Bcast::a_channel:
            return is_a ? g[i / plane] : g[i];
        case Bcast::b_channel:
            return is_a ? g[i] : g[i / plane];
    }
    return 0.0f;
}

// ---- conv helpers ----

struct ConvGeom {
    int64_t channels, rows, cols;      // dense-side spatial grid (conv input side)
    int64_t out_ch, kh, kw;            // kernel extents
    int64_t out_rows, out_cols;        // strided-side spatial grid (conv output side)
    int stride, padding;
    int64_t col_rows() const { return channels * kh * kw; }
    int64_t col_cols() const { return out_rows * out_cols; }
};

// Gathers conv patches of one CxHxW sample into a (C*Kh*Kw) x (H'*W') matrix.
void im2col(const float* x, const ConvGeom& g, float* col) {
    const int64_t patch = g.kh * g.kw;
    for (int64_t c = 0; c < g.channels; ++c) {
        const float* xc = x + c * g.rows * g.cols;
        for (int64_t ki = 0; ki < g.kh; ++ki) {
            for (int64_t kj = 0; kj < g.kw; ++kj) {
                float* row = col + (c * patch + ki * g.kw + kj) * g.col_cols();
                for (int64_t oy = 0; oy < g.out_rows; ++oy) {
                    const int64_t iy = oy * g.stride + ki - g.padding;
                    float* dst = row + oy * g.out_cols;
                    if (iy < 0 || iy >= g.rows) {
                        std::fill(dst, dst + g.out_cols, 0.0f);
                        continue;
                    }
                    const float* src = xc + iy * g.cols;
                    for (int64_t ox = 0; ox < g.out_cols; ++ox) {
                        const int64_t ix = ox * g.stride + kj - g.padding;
                        dst[ox] = (ix >= 0 && ix < g.cols) ? src[ix] : 0.0f;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds a column matrix back onto the CxHxW sample.
void col2im_add(const float* col, const ConvGeom& g, float* x) {
    const int64_t patch = g.kh * g.kw;
    for (int64_t c = 0; c < g.channels; ++c) {
        float* xc = x + c * g.rows * g.cols;
        for (int64_t ki = 0; ki < g.kh; ++ki) {
            for (int64_t kj = 0; kj < g.kw; ++kj) {
                const float* row = col + (c * patch + ki * g.kw + kj) * g.col_cols();
                for (int64_t oy = 0; oy < g.out_rows; ++oy) {
                    const int64_t iy = oy * g.stride + ki - g.padding;
                    if (iy < 0 || iy >= g.rows) continue;
                    float* dst = xc + iy * g.cols;
                    const float* src = row + oy * g.out_cols;
                    for (int64_t ox = 0; ox < g.out_cols; ++ox) {
                        const int64_t ix = ox * g.stride + kj - g.padding;
                        if (ix >= 0 && ix < g.cols) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

void sgemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
           const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
           int64_t ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb),
                beta, c, static_cast<int>(ldc));
}

void check_conv_args(const Grid& input, const Grid& kernel, const Grid& bias, int stride,
                     int padding, const char* what) {
    require_rank(input, 4, what);
    require_rank(kernel, 4, what);
    if (stride < 1) throw ShapeError(std::string(what) + ": stride must be positive");
    if (padding < 0) throw ShapeError(std::string(what) + ": padding must be non-negative");
    if (bias.rank() != 1) {
        throw ShapeError(std::string(what) + ": bias must be rank 1, got " +
                         shape_to_string(bias.shape));
    }
}

// ---- bilinear kernel shared by the graph op and the value-only helper ----

struct LerpAxis {
    std::vector<int64_t> lo;
    std::vector<float> t;
};

LerpAxis make_axis(int64_t src, int64_t dst) {
    LerpAxis ax;
    ax.lo.resize(static_cast<size_t>(dst));
    ax.t.resize(static_cast<size_t>(dst));
    for (int64_t i = 0; i < dst; ++i) {
        if (dst == 1 || src == 1) {
            ax.lo[i] = 0;
            ax.t[i] = 0.0f;
            continue;
        }
        const double pos = static_cast<double>(i) * static_cast<double>(src - 1) /
                           static_cast<double>(dst - 1);
        int64_t lo = static_cast<int64_t>(pos);
        if (lo > src - 2) lo = src - 2;
        ax.lo[i] = lo;
        ax.t[i] = static_cast<float>(pos - static_cast<double>(lo));
    }
    return ax;
}

void resize_plane(const float* src, int64_t h, int64_t w, const LerpAxis& ry, const LerpAxis& rx,
                  int64_t out_h, int64_t out_w, float* dst) {
    for (int64_t y = 0; y < out_h; ++y) {
        const int64_t y0 = ry.lo[y];
        const float ty = ry.t[y];
        const float* r0 = src + y0 * w;
        const float* r1 = src + std::min(y0 + 1, h - 1) * w;
        for (int64_t x = 0; x < out_w; ++x) {
            const int64_t x0 = rx.lo[x];
            const int64_t x1 = std::min(x0 + 1, w - 1);
            const float tx = rx.t[x];
            const float top = r0[x0] + tx * (r0[x1] - r0[x0]);
            const float bot = r1[x0] + tx * (r1[x1] - r1[x0]);
            dst[y * out_w + x] = top + ty * (bot - top);
        }
    }
}

}  // namespace

void Node::ensure_grad() {
    if (!has_grad()) grad = Grid(value.shape);
}

void Node::zero_grad() {
    if (has_grad()) std::fill(grad.data.begin(), grad.data.end(), 0.0f);
}

NodePtr make_leaf(Grid value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

NodePtr make_param(Grid value) { return make_leaf(std::move(value), true); }

NodePtr detach(const NodePtr& node) { return make_leaf(node->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise binary ----

namespace {

template <typename Fwd, typename DfA, typename DfB>
NodePtr binary_op(const NodePtr& a, const NodePtr& b, const char* op, Fwd f, DfA dfa, DfB dfb) {
    const Bcast kind = classify_broadcast(a->value, b->value, op);
    Grid out = binary_forward(a->value, b->value, kind, f);
    const Shape out_shape = out.shape;
    const int64_t out_numel = shape_numel(out_shape);
    const int64_t plane = out_shape.size() == 4 ? out_shape[2] * out_shape[3] : 1;
    return node_from(std::move(out), op, {a, b},
                     [a, b, kind, out_shape, out_numel, plane, dfa, dfb](Node& self) {
                         const Grid& g = self.grad;
                         if (a->requires_grad) {
                             a->ensure_grad();
                             accumulate_reduced(a->grad, out_shape, out_numel, [&](int64_t i) {
                                 const float bv = broadcast_pick(b->value, kind, false, i, plane);
                                 const float av = broadcast_pick(a->value, kind, true, i, plane);
                                 return g[i] * dfa(av, bv);
                             });
                         }
                         if (b->requires_grad) {
                             b->ensure_grad();
                             accumulate_reduced(b->grad, out_shape, out_numel, [&](int64_t i) {
                                 const float bv = broadcast_pick(b->value, kind, false, i, plane);
                                 const float av = broadcast_pick(a->value, kind, true, i, plane);
                                 return g[i] * dfb(av, bv);
                             });
                         }
                     });
}

}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
    return binary_op(
        a, b, "add", [](float x, float y) { return x + y; },
        [](float, float) { return 1.0f; }, [](float, float) { return 1.0f; });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    return binary_op(
        a, b, "sub", [](float x, float y) { return x - y; },
        [](float, float) { return 1.0f; }, [](float, float) { return -1.0f; });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    return binary_op(
        a, b, "mul", [](float x, float y) { return x * y; },
        [](float, float y) { return y; }, [](float x, float) { return x; });
}

// ---- elementwise unary ----

namespace {

template <typename Fwd, typename Dfdx>
NodePtr unary_op(const NodePtr& a, const char* op, Fwd f, Dfdx df) {
    Grid out(a->value.shape);
    const int64_t n = out.size();
    for (int64_t i = 0; i < n; ++i) out[i] = f(a->value[i]);
    return node_from(std::move(out), op, {a}, [a, df](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const int64_t n = self.grad.size();
        for (int64_t i = 0; i < n; ++i) {
            a->grad[i] += self.grad[i] * df(a->value[i], self.value[i]);
        }
    });
}

}  // namespace

NodePtr scale(const NodePtr& a, float factor) {
    return unary_op(
        a, "scale", [factor](float x) { return factor * x; },
        [factor](float, float) { return factor; });
}

NodePtr sigmoid(const NodePtr& a) {
    return unary_op(
        a, "sigmoid", [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
        [](float, float y) { return y * (1.0f - y); });
}

NodePtr tanh_act(const NodePtr& a) {
    return unary_op(
        a, "tanh", [](float x) { return std::tanh(x); },
        [](float, float y) { return 1.0f - y * y; });
}

NodePtr relu(const NodePtr& a) {
    return unary_op(
        a, "relu", [](float x) { return x > 0.0f ? x : 0.0f; },
        [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

NodePtr leaky_relu(const NodePtr& a, float slope) {
    return unary_op(
        a, "leaky_relu", [slope](float x) { return x > 0.0f ? x : slope * x; },
        [slope](float x, float) { return x > 0.0f ? 1.0f : slope; });
}

NodePtr log_clamped(const NodePtr& a) {
    return unary_op(
        a, "log", [](float x) { return std::log(x > 1e-12f ? x : 1e-12f); },
        [](float x, float) { return x >= 1e-12f ? 1.0f / x : 0.0f; });
}

NodePtr abs_val(const NodePtr& a) {
    return unary_op(
        a, "abs", [](float x) { return std::fabs(x); },
        [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

// ---- reductions ----

NodePtr reduce_sum(const NodePtr& a) {
    double acc = 0.0;
    for (float x : a->value.data) acc += x;
    return node_from(Grid::scalar(static_cast<float>(acc)), "sum", {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const float g = self.grad[0];
        for (float& d : a->grad.data) d += g;
    });
}

NodePtr reduce_mean(const NodePtr& a) {
    double acc = 0.0;
    for (float x : a->value.data) acc += x;
    const int64_t n = a->value.size();
    return node_from(Grid::scalar(static_cast<float>(acc / static_cast<double>(n))), "mean", {a},
                     [a, n](Node& self) {
                         if (!a->requires_grad) return;
                         a->ensure_grad();
                         const float g = self.grad[0] / static_cast<float>(n);
                         for (float& d : a->grad.data) d += g;
                     });
}

NodePtr global_avg_pool(const NodePtr& a) {
    require_rank(a->value, 4, "global_avg_pool");
    const Shape& s = a->value.shape;
    const int64_t planes = s[0] * s[1];
    const int64_t plane = s[2] * s[3];
    Grid out({s[0], s[1], 1, 1});
    for (int64_t p = 0; p < planes; ++p) {
        double acc = 0.0;
        const float* src = a->value.data.data() + p * plane;
        for (int64_t i = 0; i < plane; ++i) acc += src[i];
        out[p] = static_cast<float>(acc / static_cast<double>(plane));
    }
    return node_from(std::move(out), "global_avg_pool", {a}, [a, planes, plane](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (int64_t p = 0; p < planes; ++p) {
            const float g = self.grad[p] / static_cast<float>(plane);
            float* dst = a->grad.data.data() + p * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] += g;
        }
    });
}

// ---- structure ----

NodePtr concat_channels(const NodePtr& a, const NodePtr& b) {
    require_rank(a->value, 4, "concat_channels");
    require_rank(b->value, 4, "concat_channels");
    const Shape& sa = a->value.shape;
    const Shape& sb = b->value.shape;
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
        throw ShapeError("concat_channels: batch/spatial mismatch " + shape_to_string(sa) +
                         " vs " + shape_to_string(sb));
    }
    const int64_t batch = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
    Grid out({batch, ca + cb, sa[2], sa[3]});
    for (int64_t i = 0; i < batch; ++i) {
        std::memcpy(out.data.data() + i * (ca + cb) * plane, a->value.data.data() + i * ca * plane,
                    static_cast<size_t>(ca * plane) * sizeof(float));
        std::memcpy(out.data.data() + (i * (ca + cb) + ca) * plane,
                    b->value.data.data() + i * cb * plane,
                    static_cast<size_t>(cb * plane) * sizeof(float));
    }
    return node_from(std::move(out), "concat_channels", {a, b},
                     [a, b, batch, ca, cb, plane](Node& self) {
                         for (int64_t i = 0; i < batch; ++i) {
                             const float* g = self.grad.data.data() + i * (ca + cb) * plane;
                             if (a->requires_grad) {
                                 a->ensure_grad();
                                 float* da = a->grad.data.data() + i * ca * plane;
                                 for (int64_t j = 0; j < ca * plane; ++j) da[j] += g[j];
                             }
                             if (b->requires_grad) {
                                 b->ensure_grad();
                                 float* db = b->grad.data.data() + i * cb * plane;
                                 const float* gb = g + ca * plane;
                                 for (int64_t j = 0; j < cb * plane; ++j) db[j] += gb[j];
                             }
                         }
                     });
}

NodePtr reshape(const NodePtr& a, Shape target) {
    if (shape_numel(target) != a->value.size()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(a->value.shape) + " as " +
                         shape_to_string(target));
    }
    Grid out(std::move(target), a->value.data);
    return node_from(std::move(out), "reshape", {a}, [a](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        const int64_t n = self.grad.size();
        for (int64_t i = 0; i < n; ++i) a->grad[i] += self.grad[i];
    });
}

// ---- dense ----

NodePtr dense(const NodePtr& input, const NodePtr& weight, const NodePtr& bias) {
    require_rank(input->value, 2, "dense");
    require_rank(weight->value, 2, "dense");
    const int64_t batch = input->value.shape[0];
    const int64_t features = input->value.shape[1];
    const int64_t out_features = weight->value.shape[0];
    if (weight->value.shape[1] != features) {
        throw ShapeError("dense: weight " + shape_to_string(weight->value.shape) +
                         " does not accept input " + shape_to_string(input->value.shape));
    }
    if (bias->value.size() != out_features) {
        throw ShapeError("dense: bias length " + std::to_string(bias->value.size()) +
                         " != output features " + std::to_string(out_features));
    }
    Grid out({batch, out_features});
    sgemm(false, true, batch, out_features, features, 1.0f, input->value.data.data(), features,
          weight->value.data.data(), features, 0.0f, out.data.data(), out_features);
    for (int64_t i = 0; i < batch; ++i) {
        float* row = out.data.data() + i * out_features;
        for (int64_t j = 0; j < out_features; ++j) row[j] += bias->value[j];
    }
    return node_from(std::move(out), "dense", {input, weight, bias},
                     [input, weight, bias, batch, features, out_features](Node& self) {
                         const float* g = self.grad.data.data();
                         if (input->requires_grad) {
                             input->ensure_grad();
                             sgemm(false, false, batch, features, out_features, 1.0f, g,
                                   out_features, weight->value.data.data(), features, 1.0f,
                                   input->grad.data.data(), features);
                         }
                         if (weight->requires_grad) {
                             weight->ensure_grad();
                             sgemm(true, false, out_features, features, batch, 1.0f, g,
                                   out_features, input->value.data.data(), features, 1.0f,
                                   weight->grad.data.data(), features);
                         }
                         if (bias->requires_grad) {
                             bias->ensure_grad();
                             for (int64_t i = 0; i < batch; ++i) {
                                 const float* row = g + i * out_features;
                                 for (int64_t j = 0; j < out_features; ++j) {
                                     bias->grad[j] += row[j];
                                 }
                             }
                         }
                     });
}

// ---- conv2d ----

NodePtr conv2d(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias, int stride,
               int padding) {
    check_conv_args(input->value, kernel->value, bias->value, stride, padding, "conv2d");
    const Shape& xs = input->value.shape;
    const Shape& ks = kernel->value.shape;
    if (ks[1] != xs[1]) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(ks[1]) +
                         " input channels, got " + std::to_string(xs[1]));
    }
    if (bias->value.size() != ks[0]) {
        throw ShapeError("conv2d: bias length != output channels");
    }
    if (ks[2] > xs[2] + 2 * padding || ks[3] > xs[3] + 2 * padding) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }
    ConvGeom geom{xs[1], xs[2], xs[3], ks[0], ks[2], ks[3], 0, 0, stride, padding};
    geom.out_rows = (xs[2] + 2 * padding - ks[2]) / stride + 1;
    geom.out_cols = (xs[3] + 2 * padding - ks[3]) / stride + 1;

    const int64_t batch = xs[0];
    const int64_t k_rows = geom.col_rows();
    const int64_t n_cols = geom.col_cols();
    Grid out({batch, geom.out_ch, geom.out_rows, geom.out_cols});
    std::vector<float> col(static_cast<size_t>(k_rows * n_cols));
    for (int64_t b = 0; b < batch; ++b) {
        im2col(input->value.data.data() + b * geom.channels * geom.rows * geom.cols, geom,
               col.data());
        float* y = out.data.data() + b * geom.out_ch * n_cols;
        sgemm(false, false, geom.out_ch, n_cols, k_rows, 1.0f, kernel->value.data.data(), k_rows,
              col.data(), n_cols, 0.0f, y, n_cols);
        for (int64_t o = 0; o < geom.out_ch; ++o) {
            const float bv = bias->value[o];
            float* row = y + o * n_cols;
            for (int64_t i = 0; i < n_cols; ++i) row[i] += bv;
        }
    }
    return node_from(
        std::move(out), "conv2d", {input, kernel, bias},
        [input, kernel, bias, geom, batch, k_rows, n_cols](Node& self) {
            std::vector<float> col(static_cast<size_t>(k_rows * n_cols));
            std::vector<float> dcol;
            if (input->requires_grad) {
                input->ensure_grad();
                dcol.resize(static_cast<size_t>(k_rows * n_cols));
            }
            if (kernel->requires_grad) kernel->ensure_grad();
            if (bias->requires_grad) bias->ensure_grad();
            for (int64_t b = 0; b < batch; ++b) {
                const float* g = self.grad.data.data() + b * geom.out_ch * n_cols;
                if (kernel->requires_grad || input->requires_grad) {
                    if (kernel->requires_grad) {
                        im2col(input->value.data.data() + b * geom.channels * geom.rows * geom.cols,
                               geom, col.data());
                        sgemm(false, true, geom.out_ch, k_rows, n_cols, 1.0f, g, n_cols, col.data(),
                              n_cols, 1.0f, kernel->grad.data.data(), k_rows);
                    }
                    if (input->requires_grad) {
                        sgemm(true, false, k_rows, n_cols, geom.out_ch, 1.0f,
                              kernel->value.data.data(), k_rows, g, n_cols, 0.0f, dcol.data(),
                              n_cols);
                        col2im_add(dcol.data(), geom,
                                   input->grad.data.data() +
                                       b * geom.channels * geom.rows * geom.cols);
                    }
                }
                if (bias->requires_grad) {
                    for (int64_t o = 0; o < geom.out_ch; ++o) {
                        double acc = 0.0;
                        const float* row = g + o * n_cols;
                        for (int64_t i = 0; i < n_cols; ++i) acc += row[i];
                        bias->grad[o] += static_cast<float>(acc);
                    }
                }
            }
        });
}

// ---- conv2d_transpose ----

NodePtr conv2d_transpose(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
                         int stride, int padding) {
    check_conv_args(input->value, kernel->value, bias->value, stride, padding, "conv2d_transpose");
    const Shape& xs = input->value.shape;
    const Shape& ks = kernel->value.shape;
    if (ks[0] != xs[1]) {
        throw ShapeError("conv2d_transpose: kernel expects " + std::to_string(ks[0]) +
                         " input channels, got " + std::to_string(xs[1]));
    }
    if (bias->value.size() != ks[1]) {
        throw ShapeError("conv2d_transpose: bias length != output channels");
    }
    const int64_t out_rows = (xs[2] - 1) * stride - 2 * padding + ks[2];
    const int64_t out_cols = (xs[3] - 1) * stride - 2 * padding + ks[3];
    if (out_rows < 1 || out_cols < 1) {
        throw ShapeError("conv2d_transpose: output extents would be empty");
    }
    // Same geometry as the conv whose adjoint this is: dense side is the
    // output here, strided side is the input.
    ConvGeom geom{ks[1], out_rows, out_cols, xs[1], ks[2], ks[3], xs[2], xs[3], stride, padding};
    const int64_t batch = xs[0];
    const int64_t k_rows = geom.col_rows();
    const int64_t n_cols = geom.col_cols();  // == input spatial size
    const int64_t out_plane = out_rows * out_cols;

    Grid out({batch, geom.channels, out_rows, out_cols});
    std::vector<float> col(static_cast<size_t>(k_rows * n_cols));
    for (int64_t b = 0; b < batch; ++b) {
        const float* x = input->value.data.data() + b * geom.out_ch * n_cols;
        sgemm(true, false, k_rows, n_cols, geom.out_ch, 1.0f, kernel->value.data.data(), k_rows, x,
              n_cols, 0.0f, col.data(), n_cols);
        float* y = out.data.data() + b * geom.channels * out_plane;
        col2im_add(col.data(), geom, y);
        for (int64_t c = 0; c < geom.channels; ++c) {
            const float bv = bias->value[c];
            float* row = y + c * out_plane;
            for (int64_t i = 0; i < out_plane; ++i) row[i] += bv;
        }
    }
    return node_from(
        std::move(out), "conv2d_transpose", {input, kernel, bias},
        [input, kernel, bias, geom, batch, k_rows, n_cols, out_plane](Node& self) {
            std::vector<float> gcol(static_cast<size_t>(k_rows * n_cols));
            if (input->requires_grad) input->ensure_grad();
            if (kernel->requires_grad) kernel->ensure_grad();
            if (bias->requires_grad) bias->ensure_grad();
            for (int64_t b = 0; b < batch; ++b) {
                const float* g = self.grad.data.data() + b * geom.channels * out_plane;
                if (input->requires_grad || kernel->requires_grad) {
                    im2col(g, geom, gcol.data());
                    if (input->requires_grad) {
                        sgemm(false, false, geom.out_ch, n_cols, k_rows, 1.0f,
                              kernel->value.data.data(), k_rows, gcol.data(), n_cols, 1.0f,
                              input->grad.data.data() + b * geom.out_ch * n_cols, n_cols);
                    }
                    if (kernel->requires_grad) {
                        sgemm(false, true, geom.out_ch, k_rows, n_cols, 1.0f,
                              input->value.data.data() + b * geom.out_ch * n_cols, n_cols,
                              gcol.data(), n_cols, 1.0f, kernel->grad.data.data(), k_rows);
                    }
                }
                if (bias->requires_grad) {
                    for (int64_t c = 0; c < geom.channels; ++c) {
                        double acc = 0.0;
                        const float* row = g + c * out_plane;
                        for (int64_t i = 0; i < out_plane; ++i) acc += row[i];
                        bias->grad[c] += static_cast<float>(acc);
                    }
                }
            }
        });
}

// ---- bilinear upsample ----

NodePtr bilinear_upsample(const NodePtr& a, int64_t target_rows, int64_t target_cols) {
    require_rank(a->value, 4, "bilinear_upsample");
    const Shape& s = a->value.shape;
    if (target_rows < s[2] || target_cols < s[3]) {
        throw ShapeError("bilinear_upsample: target " + std::to_string(target_rows) + "x" +
                         std::to_string(target_cols) + " smaller than source " +
                         shape_to_string(s));
    }
    const int64_t planes = s[0] * s[1];
    const LerpAxis ry = make_axis(s[2], target_rows);
    const LerpAxis rx = make_axis(s[3], target_cols);
    Grid out({s[0], s[1], target_rows, target_cols});
    for (int64_t p = 0; p < planes; ++p) {
        resize_plane(a->value.data.data() + p * s[2] * s[3], s[2], s[3], ry, rx, target_rows,
                     target_cols, out.data.data() + p * target_rows * target_cols);
    }
    return node_from(std::move(out), "bilinear_upsample", {a},
                     [a, planes, ry, rx, target_rows, target_cols](Node& self) {
                         if (!a->requires_grad) return;
                         a->ensure_grad();
                         const int64_t h = a->value.shape[2], w = a->value.shape[3];
                         for (int64_t p = 0; p < planes; ++p) {
                             const float* g = self.grad.data.data() + p * target_rows * target_cols;
                             float* d = a->grad.data.data() + p * h * w;
                             for (int64_t y = 0; y < target_rows; ++y) {
                                 const int64_t y0 = ry.lo[y];
                                 const int64_t y1 = std::min(y0 + 1, h - 1);
                                 const float ty = ry.t[y];
                                 for (int64_t x = 0; x < target_cols; ++x) {
                                     const int64_t x0 = rx.lo[x];
                                     const int64_t x1 = std::min(x0 + 1, w - 1);
                                     const float tx = rx.t[x];
                                     const float gv = g[y * target_cols + x];
                                     d[y0 * w + x0] += gv * (1 - ty) * (1 - tx);
                                     d[y0 * w + x1] += gv * (1 - ty) * tx;
                                     d[y1 * w + x0] += gv * ty * (1 - tx);
                                     d[y1 * w + x1] += gv * ty * tx;
                                 }
                             }
                         }
                     });
}

Grid bilinear_resize_value(const Grid& src, int64_t target_rows, int64_t target_cols) {
    if (src.rank() == 2) {
        const LerpAxis ry = make_axis(src.shape[0], target_rows);
        const LerpAxis rx = make_axis(src.shape[1], target_cols);
        Grid out({target_rows, target_cols});
        resize_plane(src.data.data(), src.shape[0], src.shape[1], ry, rx, target_rows, target_cols,
                     out.data.data());
        return out;
    }
    require_rank(src, 3, "bilinear_resize_value");
    const LerpAxis ry = make_axis(src.shape[1], target_rows);
    const LerpAxis rx = make_axis(src.shape[2], target_cols);
    Grid out({src.shape[0], target_rows, target_cols});
    for (int64_t c = 0; c < src.shape[0]; ++c) {
        resize_plane(src.data.data() + c * src.shape[1] * src.shape[2], src.shape[1], src.shape[2],
                     ry, rx, target_rows, target_cols,
                     out.data.data() + c * target_rows * target_cols);
    }
    return out;
}

// ---- batch norm ----

NodePtr batch_norm(const NodePtr& input, const NodePtr& gamma, const NodePtr& beta,
                   Grid& running_mean, Grid& running_var, bool training, float momentum,
                   float eps) {
    require_rank(input->value, 4, "batch_norm");
    const Shape& s = input->value.shape;
    const int64_t channels = s[1];
    if (gamma->value.size() != channels || beta->value.size() != channels ||
        running_mean.size() != channels || running_var.size() != channels) {
        throw ShapeError("batch_norm: per-channel parameter length != channel count");
    }
    const int64_t batch = s[0], plane = s[2] * s[3];
    const int64_t n = batch * plane;

    std::vector<float> inv_std(static_cast<size_t>(channels));
    Grid xhat(s);
    if (training) {
        for (int64_t c = 0; c < channels; ++c) {
            double sum = 0.0, sq = 0.0;
            for (int64_t b = 0; b < batch; ++b) {
                const float* src = input->value.data.data() + (b * channels + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    sum += src[i];
                    sq += static_cast<double>(src[i]) * src[i];
                }
            }
            const double mean = sum / static_cast<double>(n);
            const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
            inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + eps));
            for (int64_t b = 0; b < batch; ++b) {
                const float* src = input->value.data.data() + (b * channels + c) * plane;
                float* dst = xhat.data.data() + (b * channels + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    dst[i] = (src[i] - static_cast<float>(mean)) * inv_std[c];
                }
            }
            const double unbiased = n > 1 ? var * static_cast<double>(n) / (n - 1.0) : var;
            running_mean[c] = (1.0f - momentum) * running_mean[c] +
                              momentum * static_cast<float>(mean);
            running_var[c] = (1.0f - momentum) * running_var[c] +
                             momentum * static_cast<float>(unbiased);
        }
    } else {
        for (int64_t c = 0; c < channels; ++c) {
            inv_std[c] = 1.0f / std::sqrt(running_var[c] + eps);
            for (int64_t b = 0; b < batch; ++b) {
                const float* src = input->value.data.data() + (b * channels + c) * plane;
                float* dst = xhat.data.data() + (b * channels + c) * plane;
                for (int64_t i = 0; i < plane; ++i) dst[i] = (src[i] - running_mean[c]) * inv_std[c];
            }
        }
    }
    Grid out(s);
    for (int64_t c = 0; c < channels; ++c) {
        const float gm = gamma->value[c], bt = beta->value[c];
        for (int64_t b = 0; b < batch; ++b) {
            const float* src = xhat.data.data() + (b * channels + c) * plane;
            float* dst = out.data.data() + (b * channels + c) * plane;
            for (int64_t i = 0; i < plane; ++i) dst[i] = gm * src[i] + bt;
        }
    }
    return node_from(
        std::move(out), "batch_norm", {input, gamma, beta},
        [input, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), training,
         channels, batch, plane, n](Node& self) {
            if (gamma->requires_grad) gamma->ensure_grad();
            if (beta->requires_grad) beta->ensure_grad();
            if (input->requires_grad) input->ensure_grad();
            for (int64_t c = 0; c < channels; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (int64_t b = 0; b < batch; ++b) {
                    const float* g = self.grad.data.data() + (b * channels + c) * plane;
                    const float* xh = xhat.data.data() + (b * channels + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        sum_g += g[i];
                        sum_gx += static_cast<double>(g[i]) * xh[i];
                    }
                }
                if (gamma->requires_grad) gamma->grad[c] += static_cast<float>(sum_gx);
                if (beta->requires_grad) beta->grad[c] += static_cast<float>(sum_g);
                if (!input->requires_grad) continue;
                const float gm_inv = gamma->value[c] * inv_std[c];
                if (training) {
                    const float mean_g = static_cast<float>(sum_g / static_cast<double>(n));
                    const float mean_gx = static_cast<float>(sum_gx / static_cast<double>(n));
                    for (int64_t b = 0; b < batch; ++b) {
                        const float* g = self.grad.data.data() + (b * channels + c) * plane;
                        const float* xh = xhat.data.data() + (b * channels + c) * plane;
                        float* d = input->grad.data.data() + (b * channels + c) * plane;
                        for (int64_t i = 0; i < plane; ++i) {
                            d[i] += gm_inv * (g[i] - mean_g - xh[i] * mean_gx);
                        }
                    }
                } else {
                    for (int64_t b = 0; b < batch; ++b) {
                        const float* g = self.grad.data.data() + (b * channels + c) * plane;
                        float* d = input->grad.data.data() + (b * channels + c) * plane;
                        for (int64_t i = 0; i < plane; ++i) d[i] += gm_inv * g[i];
                    }
                }
            }
        });
}

// ---- dropout ----

NodePtr dropout(const NodePtr& input, float rate, Pcg32& rng, bool training) {
    if (rate < 0.0f || rate >= 1.0f) {
        throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0f) return input;
    const float keep_scale = 1.0f / (1.0f - rate);
    Grid mask(input->value.shape);
    for (float& m : mask.data) m = (rng.uniform() >= rate) ? keep_scale : 0.0f;
    Grid out(input->value.shape);
    const int64_t n = out.size();
    for (int64_t i = 0; i < n; ++i) out[i] = input->value[i] * mask[i];
    return node_from(std::move(out), "dropout", {input}, [input, mask = std::move(mask)](Node& self) {
        if (!input->requires_grad) return;
        input->ensure_grad();
        const int64_t n = self.grad.size();
        for (int64_t i = 0; i < n; ++i) input->grad[i] += self.grad[i] * mask[i];
    });
}

// ---- backward ----

void backward(const NodePtr& root) {
    if (!root) throw StateError("backward: null root");
    if (root->value.size() != 1) {
        throw ShapeError("backward requires a scalar root, got " +
                         shape_to_string(root->value.shape));
    }
    // Iterative post-order DFS; reversed it is a topological order from the
    // root down to the leaves.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx].get();
            ++idx;
            if (parent && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior gradients are scratch space rebuilt per call; leaf gradients
    // persist so that repeated backward calls accumulate.
    for (Node* n : order) {
        if (!n->parents.empty()) {
            n->ensure_grad();
            n->zero_grad();
        }
    }
    root->ensure_grad();
    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backward_fn) n->backward_fn(*n);
    }
}

void zero_grads(std::span<const NodePtr> params) {
    for (const auto& p : params) {
        if (p) p->zero_grad();
    }
}

}  // namespace nvgan
