#pragma once

#include <filesystem>
#include <vector>

#include "nvgan/grid.hpp"
#include "nvgan/metrics.hpp"

namespace nvgan {

struct FlowConfig {
    int pyramid_levels = 3;
    int outer_warps = 4;      // re-linearizations per pyramid level
    int iterations = 60;      // Gauss-Seidel sweeps per linearization
    float alpha = 0.2f;       // smoothness weight, scaled for unit-range frames
    float max_displacement = 24.0f;
};

// Dense per-pixel displacement in pixels per step. u moves columns, v rows.
struct FlowField {
    Grid u;
    Grid v;
};

// Energy traces of each linearized solve, innermost level first; each trace is
// non-increasing by construction of the block coordinate descent.
struct FlowDiagnostics {
    std::vector<std::vector<double>> energies;
};

// Reduces a 3xHxW grid in dataset channel order (blue, green, red) to
// luminance with the 0.299/0.587/0.114 weights; passes HxW (or 1xHxW) through.
Grid to_luminance(const Grid& frame);

// Brightness-constancy + quadratic smoothness, solved coarse-to-fine.
// Identical frames give a zero field; non-finite input is rejected.
FlowField estimate_flow(const Grid& frame_t0, const Grid& frame_t1, const FlowConfig& cfg = {},
                        FlowDiagnostics* diag = nullptr);

// Semi-Lagrangian backward warp by +flow with bilinear sampling and edge
// clamping, applied per channel; `steps` repeats the warp.
Grid extrapolate(const Grid& frame_t1, const FlowField& flow, int steps = 1);

// Extrapolates t2 from (t0, t1) and scores synth_t2 against that benchmark
// restricted to the given region.
MetricsReport benchmark_quadrant(const Grid& real_t0, const Grid& real_t1, const Grid& synth_t2,
                                 const RegionSpec& region, const FlowConfig& cfg = {},
                                 float albedo_max = 1.65f);

// Writes <stem>_u.raw and <stem>_v.raw (flat little-endian float32) plus a
// <stem>_flow.json manifest entry describing them.
void export_flow_field(const FlowField& flow, const std::filesystem::path& dir,
                       const std::string& stem);

}  // namespace nvgan
