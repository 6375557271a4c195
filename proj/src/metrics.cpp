#include "nvgan/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "nvgan/dataset.hpp"

namespace nvgan {

namespace {

// Accepts N, HxW, CxHxW or BxCxHxW and reports (planes, rows, cols).
void spatial_layout(const Grid& g, int64_t& planes, int64_t& rows, int64_t& cols) {
    if (g.rank() == 1) {
        planes = 1;
        rows = 1;
        cols = g.shape[0];
    } else if (g.rank() == 2) {
        planes = 1;
        rows = g.shape[0];
        cols = g.shape[1];
    } else if (g.rank() == 3) {
        planes = g.shape[0];
        rows = g.shape[1];
        cols = g.shape[2];
    } else if (g.rank() == 4) {
        planes = g.shape[0] * g.shape[1];
        rows = g.shape[2];
        cols = g.shape[3];
    } else {
        throw ShapeError("metrics: expected 1-4 dimensional grids, got " +
                         shape_to_string(g.shape));
    }
}

const Grid* check_mask(const Grid* mask, int64_t rows, int64_t cols) {
    if (!mask) return nullptr;
    if (mask->shape != Shape{rows, cols}) {
        throw ShapeError("metrics: mask " + shape_to_string(mask->shape) +
                         " does not match spatial extents " +
                         shape_to_string({rows, cols}));
    }
    bool any = false;
    for (float v : mask->data) {
        if (v != 0.0f) {
            any = true;
            break;
        }
    }
    if (!any) throw ShapeError("metrics: mask selects no cells");
    return mask;
}

template <typename Accum>
double masked_mean(const Grid& I, const Grid& K, const Grid* mask, Accum f) {
    require_same_shape(I, K, "metrics");
    int64_t planes = 0, rows = 0, cols = 0;
    spatial_layout(I, planes, rows, cols);
    mask = check_mask(mask, rows, cols);
    double acc = 0.0;
    int64_t count = 0;
    const int64_t plane = rows * cols;
    for (int64_t p = 0; p < planes; ++p) {
        const float* a = I.data.data() + p * plane;
        const float* b = K.data.data() + p * plane;
        for (int64_t i = 0; i < plane; ++i) {
            if (mask && mask->data[static_cast<size_t>(i)] == 0.0f) continue;
            acc += f(static_cast<double>(a[i]) - static_cast<double>(b[i]));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

RegionSpec bottom_right_quadrant(int64_t rows, int64_t cols) {
    return {rows / 2, rows, cols / 2, cols};
}

double mae(const Grid& I, const Grid& K, const Grid* mask) {
    return masked_mean(I, K, mask, [](double d) { return std::fabs(d); });
}

double rmse(const Grid& I, const Grid& K, const Grid* mask) {
    return std::sqrt(masked_mean(I, K, mask, [](double d) { return d * d; }));
}

double psnr(const Image& I, const Image& K, double max_i) {
    if (I.rows != K.rows || I.cols != K.cols) {
        throw ShapeError("psnr: image extents differ");
    }
    double mse = 0.0;
    for (size_t i = 0; i < I.rgb.size(); ++i) {
        const double d = static_cast<double>(I.rgb[i]) - static_cast<double>(K.rgb[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(I.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(max_i / std::sqrt(mse));
}

double ssim(const Image& I, const Image& K, const SsimConfig& cfg) {
    if (I.rows != K.rows || I.cols != K.cols) {
        throw ShapeError("ssim: image extents differ");
    }
    if (cfg.window > I.rows || cfg.window > I.cols) {
        throw ShapeError("ssim: window larger than image");
    }
    if (cfg.window < 1 || cfg.stride < 1) throw ShapeError("ssim: bad window config");
    const int64_t w = cfg.window;
    const double n = static_cast<double>(w * w);
    double channel_sum = 0.0;
    for (int64_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        int64_t windows = 0;
        for (int64_t r = 0; r + w <= I.rows; r += cfg.stride) {
            for (int64_t c = 0; c + w <= I.cols; c += cfg.stride) {
                double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
                for (int64_t i = 0; i < w; ++i) {
                    for (int64_t j = 0; j < w; ++j) {
                        const double x = I.at(r + i, c + j, ch);
                        const double y = K.at(r + i, c + j, ch);
                        sx += x;
                        sy += y;
                        sxx += x * x;
                        syy += y * y;
                        sxy += x * y;
                    }
                }
                const double mx = sx / n, my = sy / n;
                const double vx = sxx / n - mx * mx;
                const double vy = syy / n - my * my;
                const double cov = sxy / n - mx * my;
                const double value = ((2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2)) /
                                     ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2));
                acc += value;
                ++windows;
            }
        }
        channel_sum += acc / static_cast<double>(windows);
    }
    return channel_sum / 3.0;
}

Grid crop_grid(const Grid& g, const RegionSpec& region) {
    int64_t planes = 0, rows = 0, cols = 0;
    spatial_layout(g, planes, rows, cols);
    if (region.row0 < 0 || region.col0 < 0 || region.row1 > rows || region.col1 > cols ||
        region.rows() < 1 || region.cols() < 1) {
        throw ShapeError("crop_grid: region outside grid");
    }
    Shape out_shape = g.shape;
    out_shape[out_shape.size() - 2] = region.rows();
    out_shape[out_shape.size() - 1] = region.cols();
    Grid out(out_shape);
    for (int64_t p = 0; p < planes; ++p) {
        for (int64_t r = 0; r < region.rows(); ++r) {
            const float* src =
                g.data.data() + (p * rows + region.row0 + r) * cols + region.col0;
            float* dst = out.data.data() + (p * region.rows() + r) * region.cols();
            std::copy(src, src + region.cols(), dst);
        }
    }
    return out;
}

MetricsReport evaluate(const Grid& y_true_albedo, const Grid& y_synth_albedo,
                       const RegionSpec* region, float albedo_max, const SsimConfig& ssim_cfg) {
    require_same_shape(y_true_albedo, y_synth_albedo, "evaluate");
    Grid t = region ? crop_grid(y_true_albedo, *region) : y_true_albedo;
    Grid s = region ? crop_grid(y_synth_albedo, *region) : y_synth_albedo;
    MetricsReport report;
    report.mae = mae(t, s);
    report.rmse = rmse(t, s);
    const Image ti = albedo_to_image(t, albedo_max);
    const Image si = albedo_to_image(s, albedo_max);
    report.psnr = psnr(ti, si);
    report.ssim = ssim(ti, si, ssim_cfg);
    if (region) report.region = *region;
    return report;
}

std::string metrics_conventions(const SsimConfig& cfg) {
    std::ostringstream os;
    os << "MAE/RMSE on albedo grids (channels pooled); PSNR on 8-bit images with MSE pooled "
          "over channels and pixels, MAX_I=255, infinite when MSE=0; SSIM on 8-bit images, "
       << cfg.window << "x" << cfg.window << " windows, stride " << cfg.stride
       << ", uniform weighting, per channel then channel-averaged, c1=" << cfg.c1
       << ", c2=" << cfg.c2 << " (c3 accepted but unused).";
    return os.str();
}

std::string MetricsReport::to_text() const {
    std::ostringstream os;
    os << "mae=" << mae << " rmse=" << rmse << " psnr=";
    if (std::isinf(psnr)) {
        os << "inf";
    } else {
        os << psnr;
    }
    os << " ssim=" << ssim;
    if (region) {
        os << " region=[" << region->row0 << ":" << region->row1 << "," << region->col0 << ":"
           << region->col1 << "]";
    }
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["mae"] = mae;
    j["rmse"] = rmse;
    if (std::isinf(psnr)) {
        j["psnr"] = "inf";
    } else {
        j["psnr"] = psnr;
    }
    j["ssim"] = ssim;
    if (region) {
        j["region"] = {region->row0, region->row1, region->col0, region->col1};
    }
    return j.dump();
}

}  // namespace nvgan
