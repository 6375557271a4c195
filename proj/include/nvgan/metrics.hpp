#pragma once

#include <optional>
#include <string>

#include "nvgan/grid.hpp"
#include "nvgan/image.hpp"

namespace nvgan {

struct RegionSpec {
    int64_t row0 = 0, row1 = 0, col0 = 0, col1 = 0;
    int64_t rows() const { return row1 - row0; }
    int64_t cols() const { return col1 - col0; }
};

RegionSpec bottom_right_quadrant(int64_t rows, int64_t cols);

struct SsimConfig {
    int window = 8;
    int stride = 4;
    double c1 = 0.01 * 255.0 * 0.01 * 255.0;  // (0.01 L)^2, L = 255
    double c2 = 0.03 * 255.0 * 0.03 * 255.0;  // (0.03 L)^2
    double c3 = 0.0;                          // accepted, unused
};

struct MetricsReport {
    double mae = 0.0;   // albedo units
    double rmse = 0.0;  // albedo units
    double psnr = 0.0;  // dB; infinity when the images are identical
    double ssim = 0.0;
    std::optional<RegionSpec> region;

    std::string to_text() const;
    std::string to_json() const;
};

// Conventions block shipped with every report.
std::string metrics_conventions(const SsimConfig& cfg = {});

// Mean absolute difference over unmasked cells, channels pooled. The optional
// mask matches the spatial extents and applies to every channel.
double mae(const Grid& I, const Grid& K, const Grid* mask = nullptr);
double rmse(const Grid& I, const Grid& K, const Grid* mask = nullptr);

// 20*log10(max_i / sqrt(MSE)) with MSE pooled over channels and pixels;
// returns +infinity when MSE is zero.
double psnr(const Image& I, const Image& K, double max_i = 255.0);

// Sliding-window structural similarity, per channel then channel-averaged.
double ssim(const Image& I, const Image& K, const SsimConfig& cfg = {});

// MAE/RMSE on albedo grids, PSNR/SSIM on the rendered 8-bit images. A region
// restricts evaluation by cropping both inputs first.
MetricsReport evaluate(const Grid& y_true_albedo, const Grid& y_synth_albedo,
                       const RegionSpec* region = nullptr, float albedo_max = 1.65f,
                       const SsimConfig& ssim_cfg = {});

Grid crop_grid(const Grid& g, const RegionSpec& region);

}  // namespace nvgan
