#include "nvgan/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "nvgan/autodiff.hpp"
#include "nvgan/dataset.hpp"

namespace nvgan {

namespace {

struct Plane {
    int64_t rows = 0, cols = 0;
    std::vector<float> v;
    float at(int64_t r, int64_t c) const {
        r = std::clamp<int64_t>(r, 0, rows - 1);
        c = std::clamp<int64_t>(c, 0, cols - 1);
        return v[static_cast<size_t>(r * cols + c)];
    }
    float sample(float r, float c) const {
        r = std::clamp(r, 0.0f, static_cast<float>(rows - 1));
        c = std::clamp(c, 0.0f, static_cast<float>(cols - 1));
        const int64_t r0 = std::min<int64_t>(static_cast<int64_t>(r), rows - 1);
        const int64_t c0 = std::min<int64_t>(static_cast<int64_t>(c), cols - 1);
        const int64_t r1 = std::min<int64_t>(r0 + 1, rows - 1);
        const int64_t c1 = std::min<int64_t>(c0 + 1, cols - 1);
        const float tr = r - static_cast<float>(r0);
        const float tc = c - static_cast<float>(c0);
        const float top = at(r0, c0) + tc * (at(r0, c1) - at(r0, c0));
        const float bot = at(r1, c0) + tc * (at(r1, c1) - at(r1, c0));
        return top + tr * (bot - top);
    }
};

Plane plane_from_grid(const Grid& g) {
    Plane p;
    if (g.rank() == 2) {
        p.rows = g.shape[0];
        p.cols = g.shape[1];
    } else if (g.rank() == 3 && g.shape[0] == 1) {
        p.rows = g.shape[1];
        p.cols = g.shape[2];
    } else {
        throw ShapeError("flow: expected a single-channel frame, got " +
                         shape_to_string(g.shape));
    }
    p.v = g.data;
    return p;
}

Plane smooth3(const Plane& src) {
    // 3x3 binomial presmoothing.
    Plane out = src;
    static const float k[3] = {0.25f, 0.5f, 0.25f};
    Plane tmp = src;
    for (int64_t r = 0; r < src.rows; ++r) {
        for (int64_t c = 0; c < src.cols; ++c) {
            float acc = 0.0f;
            for (int d = -1; d <= 1; ++d) acc += k[d + 1] * src.at(r, c + d);
            tmp.v[static_cast<size_t>(r * src.cols + c)] = acc;
        }
    }
    for (int64_t r = 0; r < src.rows; ++r) {
        for (int64_t c = 0; c < src.cols; ++c) {
            float acc = 0.0f;
            for (int d = -1; d <= 1; ++d) acc += k[d + 1] * tmp.at(r + d, c);
            out.v[static_cast<size_t>(r * src.cols + c)] = acc;
        }
    }
    return out;
}

Plane downsample2(const Plane& src) {
    Plane out;
    out.rows = std::max<int64_t>(1, src.rows / 2);
    out.cols = std::max<int64_t>(1, src.cols / 2);
    out.v.resize(static_cast<size_t>(out.rows * out.cols));
    for (int64_t r = 0; r < out.rows; ++r) {
        for (int64_t c = 0; c < out.cols; ++c) {
            const float acc = src.at(2 * r, 2 * c) + src.at(2 * r, 2 * c + 1) +
                              src.at(2 * r + 1, 2 * c) + src.at(2 * r + 1, 2 * c + 1);
            out.v[static_cast<size_t>(r * out.cols + c)] = 0.25f * acc;
        }
    }
    return out;
}

Plane upsample_flow(const Plane& src, int64_t rows, int64_t cols) {
    Grid g({src.rows, src.cols}, src.v);
    Grid up = bilinear_resize_value(g, rows, cols);
    Plane out;
    out.rows = rows;
    out.cols = cols;
    out.v = std::move(up.data);
    for (float& x : out.v) x *= 2.0f;
    return out;
}

// Discrete energy: sum (Ix du + Iy dv + It)^2 + alpha^2 * forward-difference
// smoothness of the total flow (u0+du, v0+dv).
double flow_energy(const Plane& ix, const Plane& iy, const Plane& it, const Plane& du,
                   const Plane& dv, const Plane& u0, const Plane& v0, float alpha) {
    const int64_t rows = ix.rows, cols = ix.cols;
    double e = 0.0;
    const double a2 = static_cast<double>(alpha) * alpha;
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            const double data = ix.at(r, c) * du.at(r, c) + iy.at(r, c) * dv.at(r, c) +
                                it.at(r, c);
            e += data * data;
            const double u = u0.at(r, c) + du.at(r, c);
            const double v = v0.at(r, c) + dv.at(r, c);
            if (c + 1 < cols) {
                const double dux = u0.at(r, c + 1) + du.at(r, c + 1) - u;
                const double dvx = v0.at(r, c + 1) + dv.at(r, c + 1) - v;
                e += a2 * (dux * dux + dvx * dvx);
            }
            if (r + 1 < rows) {
                const double duy = u0.at(r + 1, c) + du.at(r + 1, c) - u;
                const double dvy = v0.at(r + 1, c) + dv.at(r + 1, c) - v;
                e += a2 * (duy * duy + dvy * dvy);
            }
        }
    }
    return e;
}

// One in-place sweep of exact per-pixel 2x2 block solves. Block coordinate
// descent on a convex quadratic, so the energy cannot increase.
void gauss_seidel_sweep(const Plane& ix, const Plane& iy, const Plane& it, Plane& du, Plane& dv,
                        const Plane& u0, const Plane& v0, float alpha) {
    const int64_t rows = ix.rows, cols = ix.cols;
    const double a2 = static_cast<double>(alpha) * alpha;
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            double nsum_u = 0.0, nsum_v = 0.0;
            int64_t n = 0;
            auto neighbor = [&](int64_t rr, int64_t cc) {
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) return;
                nsum_u += u0.at(rr, cc) + du.at(rr, cc);
                nsum_v += v0.at(rr, cc) + dv.at(rr, cc);
                ++n;
            };
            neighbor(r - 1, c);
            neighbor(r + 1, c);
            neighbor(r, c - 1);
            neighbor(r, c + 1);
            const double gx = ix.at(r, c), gy = iy.at(r, c), gt = it.at(r, c);
            const double an = a2 * static_cast<double>(n);
            // Exact block solve over the total flow (U, V) at this pixel:
            //   (gx^2 + a^2 n) U + gx gy V = a^2 sum(U_q) + gx (gx u0 + gy v0 - gt)
            //   gx gy U + (gy^2 + a^2 n) V = a^2 sum(V_q) + gy (gx u0 + gy v0 - gt)
            const double residual = gx * u0.at(r, c) + gy * v0.at(r, c) - gt;
            const double rhs_u = a2 * nsum_u + gx * residual;
            const double rhs_v = a2 * nsum_v + gy * residual;
            const double a11 = gx * gx + an;
            const double a12 = gx * gy;
            const double a22 = gy * gy + an;
            const double det = a11 * a22 - a12 * a12;
            double U, V;
            if (det > 1e-12) {
                U = (a22 * rhs_u - a12 * rhs_v) / det;
                V = (a11 * rhs_v - a12 * rhs_u) / det;
            } else {
                U = u0.at(r, c) + du.at(r, c);
                V = v0.at(r, c) + dv.at(r, c);
            }
            du.v[static_cast<size_t>(r * cols + c)] = static_cast<float>(U - u0.at(r, c));
            dv.v[static_cast<size_t>(r * cols + c)] = static_cast<float>(V - v0.at(r, c));
        }
    }
}

// Backward warp by +flow: the forecast direction used by extrapolate().
Plane warp_plane(const Plane& frame, const Plane& u, const Plane& v) {
    Plane out = frame;
    for (int64_t r = 0; r < frame.rows; ++r) {
        for (int64_t c = 0; c < frame.cols; ++c) {
            out.v[static_cast<size_t>(r * frame.cols + c)] =
                frame.sample(static_cast<float>(r) - v.at(r, c),
                             static_cast<float>(c) - u.at(r, c));
        }
    }
    return out;
}

// Alignment warp: brings frame_t1 back onto frame_t0 under the current flow
// estimate, so the residual drives the next linearization.
Plane align_plane(const Plane& frame, const Plane& u, const Plane& v) {
    Plane out = frame;
    for (int64_t r = 0; r < frame.rows; ++r) {
        for (int64_t c = 0; c < frame.cols; ++c) {
            out.v[static_cast<size_t>(r * frame.cols + c)] =
                frame.sample(static_cast<float>(r) + v.at(r, c),
                             static_cast<float>(c) + u.at(r, c));
        }
    }
    return out;
}

void derivatives(const Plane& f0, const Plane& f1w, Plane& ix, Plane& iy, Plane& it) {
    const int64_t rows = f0.rows, cols = f0.cols;
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            const size_t i = static_cast<size_t>(r * cols + c);
            ix.v[i] = 0.25f * (f0.at(r, c + 1) - f0.at(r, c - 1) + f1w.at(r, c + 1) -
                               f1w.at(r, c - 1));
            iy.v[i] = 0.25f * (f0.at(r + 1, c) - f0.at(r - 1, c) + f1w.at(r + 1, c) -
                               f1w.at(r - 1, c));
            it.v[i] = f1w.at(r, c) - f0.at(r, c);
        }
    }
}

}  // namespace

Grid to_luminance(const Grid& frame) {
    if (frame.rank() == 2) return frame;
    if (frame.rank() == 3 && frame.shape[0] == 1) {
        return Grid({frame.shape[1], frame.shape[2]}, frame.data);
    }
    require_rank(frame, 3, "to_luminance");
    if (frame.shape[0] != 3) {
        throw ShapeError("to_luminance: expected 3 channels, got " +
                         std::to_string(frame.shape[0]));
    }
    const int64_t plane = frame.shape[1] * frame.shape[2];
    const float* blue = frame.data.data();
    const float* green = blue + plane;
    const float* red = green + plane;
    Grid out({frame.shape[1], frame.shape[2]});
    for (int64_t i = 0; i < plane; ++i) {
        out[i] = 0.299f * red[i] + 0.587f * green[i] + 0.114f * blue[i];
    }
    return out;
}

FlowField estimate_flow(const Grid& frame_t0, const Grid& frame_t1, const FlowConfig& cfg,
                        FlowDiagnostics* diag) {
    Grid lum0 = to_luminance(frame_t0);
    Grid lum1 = to_luminance(frame_t1);
    require_same_shape(lum0, lum1, "estimate_flow");
    for (float v : lum0.data) {
        if (!std::isfinite(v)) throw DataError("estimate_flow: non-finite value in frame_t0");
    }
    for (float v : lum1.data) {
        if (!std::isfinite(v)) throw DataError("estimate_flow: non-finite value in frame_t1");
    }
    std::vector<Plane> pyr0{smooth3(plane_from_grid(lum0))};
    std::vector<Plane> pyr1{smooth3(plane_from_grid(lum1))};
    for (int l = 1; l < cfg.pyramid_levels; ++l) {
        if (pyr0.back().rows < 8 || pyr0.back().cols < 8) break;
        pyr0.push_back(downsample2(smooth3(pyr0.back())));
        pyr1.push_back(downsample2(smooth3(pyr1.back())));
    }

    Plane u, v;
    u.rows = pyr0.back().rows;
    u.cols = pyr0.back().cols;
    u.v.assign(static_cast<size_t>(u.rows * u.cols), 0.0f);
    v = u;

    for (int level = static_cast<int>(pyr0.size()) - 1; level >= 0; --level) {
        const Plane& f0 = pyr0[static_cast<size_t>(level)];
        const Plane& f1 = pyr1[static_cast<size_t>(level)];
        if (u.rows != f0.rows || u.cols != f0.cols) {
            u = upsample_flow(u, f0.rows, f0.cols);
            v = upsample_flow(v, f0.rows, f0.cols);
        }
        Plane ix = f0, iy = f0, it = f0;
        for (int warp = 0; warp < cfg.outer_warps; ++warp) {
            const Plane f1w = align_plane(f1, u, v);
            derivatives(f0, f1w, ix, iy, it);
            Plane du = u, dv = v;
            std::fill(du.v.begin(), du.v.end(), 0.0f);
            std::fill(dv.v.begin(), dv.v.end(), 0.0f);
            std::vector<double> trace;
            trace.push_back(flow_energy(ix, iy, it, du, dv, u, v, cfg.alpha));
            for (int iter = 0; iter < cfg.iterations; ++iter) {
                gauss_seidel_sweep(ix, iy, it, du, dv, u, v, cfg.alpha);
                trace.push_back(flow_energy(ix, iy, it, du, dv, u, v, cfg.alpha));
            }
            for (size_t i = 1; i < trace.size(); ++i) {
                if (trace[i] > trace[i - 1] * (1.0 + 1e-6) + 1e-9) {
                    throw StateError("flow solver energy increased within a linearization");
                }
            }
            if (diag) diag->energies.push_back(std::move(trace));
            for (size_t i = 0; i < u.v.size(); ++i) {
                u.v[i] += du.v[i];
                v.v[i] += dv.v[i];
            }
        }
        for (size_t i = 0; i < u.v.size(); ++i) {
            u.v[i] = std::clamp(u.v[i], -cfg.max_displacement, cfg.max_displacement);
            v.v[i] = std::clamp(v.v[i], -cfg.max_displacement, cfg.max_displacement);
        }
    }
    FlowField field;
    field.u = Grid({u.rows, u.cols}, u.v);
    field.v = Grid({v.rows, v.cols}, v.v);
    return field;
}

Grid extrapolate(const Grid& frame_t1, const FlowField& flow, int steps) {
    if (steps < 1) throw ConfigError("extrapolate: steps must be >= 1");
    int64_t channels = 1, rows = 0, cols = 0;
    Shape out_shape = frame_t1.shape;
    if (frame_t1.rank() == 2) {
        rows = frame_t1.shape[0];
        cols = frame_t1.shape[1];
    } else if (frame_t1.rank() == 3) {
        channels = frame_t1.shape[0];
        rows = frame_t1.shape[1];
        cols = frame_t1.shape[2];
    } else {
        throw ShapeError("extrapolate: expected HxW or CxHxW frame");
    }
    if (flow.u.shape != Shape{rows, cols} || flow.v.shape != Shape{rows, cols}) {
        throw ShapeError("extrapolate: flow extents do not match the frame");
    }
    Plane u = plane_from_grid(flow.u);
    Plane v = plane_from_grid(flow.v);
    Grid current = frame_t1;
    for (int s = 0; s < steps; ++s) {
        Grid next(out_shape);
        for (int64_t ch = 0; ch < channels; ++ch) {
            Plane p;
            p.rows = rows;
            p.cols = cols;
            p.v.assign(current.data.begin() + ch * rows * cols,
                       current.data.begin() + (ch + 1) * rows * cols);
            Plane warped = warp_plane(p, u, v);
            std::copy(warped.v.begin(), warped.v.end(), next.data.begin() + ch * rows * cols);
        }
        current = std::move(next);
    }
    return current;
}

MetricsReport benchmark_quadrant(const Grid& real_t0, const Grid& real_t1, const Grid& synth_t2,
                                 const RegionSpec& region, const FlowConfig& cfg,
                                 float albedo_max) {
    const FlowField flow = estimate_flow(real_t0, real_t1, cfg);
    const Grid benchmark = extrapolate(real_t1, flow, 1);
    return evaluate(benchmark, synth_t2, &region, albedo_max);
}

void export_flow_field(const FlowField& flow, const std::filesystem::path& dir,
                       const std::string& stem) {
    write_raw_grid(dir / (stem + "_u.raw"), flow.u);
    write_raw_grid(dir / (stem + "_v.raw"), flow.v);
    nlohmann::json j;
    j["rows"] = flow.u.shape[0];
    j["cols"] = flow.u.shape[1];
    j["u_file"] = stem + "_u.raw";
    j["v_file"] = stem + "_v.raw";
    j["units"] = "pixels per step; u moves columns, v moves rows";
    j["format"] = "flat little-endian float32, row-major";
    std::ofstream out(dir / (stem + "_flow.json"));
    if (!out) throw DataError("cannot write flow manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

}  // namespace nvgan
