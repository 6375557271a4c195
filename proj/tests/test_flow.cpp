#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "nvgan/flow.hpp"

using namespace nvgan;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Smooth periodic pattern; integer shifts wrap around exactly.
Grid smooth_pattern(int64_t rows, int64_t cols, double shift_cols, double shift_rows = 0.0) {
    Grid g({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
            const double x = (static_cast<double>(c) - shift_cols) / static_cast<double>(cols);
            const double y = (static_cast<double>(r) - shift_rows) / static_cast<double>(rows);
            g[r * cols + c] = static_cast<float>(
                0.5 + 0.22 * std::sin(kTau * 3.0 * x) + 0.17 * std::cos(kTau * 2.0 * y) +
                0.11 * std::sin(kTau * (2.0 * x + 3.0 * y)));
        }
    }
    return g;
}

double mean_of(const Grid& g) {
    double acc = 0.0;
    for (float v : g.data) acc += v;
    return acc / static_cast<double>(g.size());
}

}  // namespace

TEST_CASE("identical frames give a zero flow field") {
    const Grid frame = smooth_pattern(32, 32, 0.0);
    const FlowField flow = estimate_flow(frame, frame);
    for (int64_t i = 0; i < flow.u.size(); ++i) {
        CHECK(std::fabs(flow.u[i]) < 0.05f);
        CHECK(std::fabs(flow.v[i]) < 0.05f);
    }
}

TEST_CASE("a 2-pixel translation is recovered within 0.3 pixels") {
    const Grid f0 = smooth_pattern(48, 48, 0.0);
    const Grid f1 = smooth_pattern(48, 48, 2.0);
    const FlowField flow = estimate_flow(f0, f1);
    CHECK(mean_of(flow.u) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(std::fabs(mean_of(flow.v)) < 0.3);
}

TEST_CASE("rotation produces flow with matching curl sign") {
    const int64_t n = 48;
    const double theta = 0.05;  // radians, counter-clockwise in (row, col) space
    Grid f0({n, n}), f1({n, n});
    const double cx = (n - 1) / 2.0;
    auto sample = [&](double r, double c) {
        const double x = c / n, y = r / n;
        return 0.5 + 0.2 * std::sin(kTau * 2.5 * x) * std::cos(kTau * 1.5 * y) +
               0.15 * std::cos(kTau * (x + 2.0 * y));
    };
    // Sampling f1 at R^-1 p moves content along w = (R - I) p, whose discrete
    // curl dv/dcol - du/drow equals +2 theta.
    for (int64_t r = 0; r < n; ++r) {
        for (int64_t c = 0; c < n; ++c) {
            f0[r * n + c] = static_cast<float>(sample(r, c));
            const double dr = static_cast<double>(r) - cx;
            const double dc = static_cast<double>(c) - cx;
            const double sr = cx + std::cos(theta) * dr - std::sin(theta) * dc;
            const double sc = cx + std::sin(theta) * dr + std::cos(theta) * dc;
            f1[r * n + c] = static_cast<float>(sample(sr, sc));
        }
    }
    const FlowField flow = estimate_flow(f0, f1);
    double curl = 0.0;
    int64_t count = 0;
    for (int64_t r = 8; r < n - 8; ++r) {
        for (int64_t c = 8; c < n - 8; ++c) {
            const double dv_dc = (flow.v[r * n + c + 1] - flow.v[r * n + c - 1]) / 2.0;
            const double du_dr = (flow.u[(r + 1) * n + c] - flow.u[(r - 1) * n + c]) / 2.0;
            curl += dv_dc - du_dr;
            ++count;
        }
    }
    CHECK(curl / count > 0.5 * theta);
    CHECK(curl / count < 4.0 * theta);
}

TEST_CASE("warping with zero flow is the identity") {
    const Grid frame = smooth_pattern(24, 24, 0.0);
    FlowField zero{Grid({24, 24}), Grid({24, 24})};
    const Grid out = extrapolate(frame, zero, 1);
    CHECK(out.data == frame.data);
    CHECK_THROWS_AS(extrapolate(frame, zero, 0), ConfigError);
}

TEST_CASE("uniform flow warps a smooth pattern onto its shifted version") {
    const Grid f1 = smooth_pattern(48, 48, 2.0);
    const Grid truth = smooth_pattern(48, 48, 4.0);
    FlowField flow{Grid::full({48, 48}, 2.0f), Grid({48, 48})};
    const Grid forecast = extrapolate(f1, flow, 1);
    // compare away from the clamped border
    double err = 0.0;
    int64_t count = 0;
    for (int64_t r = 4; r < 44; ++r) {
        for (int64_t c = 4; c < 44; ++c) {
            err += std::fabs(forecast[r * 48 + c] - truth[r * 48 + c]);
            ++count;
        }
    }
    CHECK(err / count < 0.02);  // pattern dynamic range is ~1
}

TEST_CASE("extrapolation beats persistence on an advecting sequence") {
    const Grid f0 = smooth_pattern(48, 48, 0.0, 0.0);
    const Grid f1 = smooth_pattern(48, 48, 2.0, 1.0);
    const Grid f2 = smooth_pattern(48, 48, 4.0, 2.0);
    const FlowField flow = estimate_flow(f0, f1);
    const Grid forecast = extrapolate(f1, flow, 1);
    double err_flow = 0.0, err_persist = 0.0;
    for (int64_t i = 0; i < f2.size(); ++i) {
        err_flow += std::fabs(forecast[i] - f2[i]);
        err_persist += std::fabs(f1[i] - f2[i]);
    }
    CHECK(err_flow < 0.7 * err_persist);
}

TEST_CASE("integer shifts of both frames leave the interior flow unchanged") {
    const int64_t n = 48;
    const Grid f0 = smooth_pattern(n, n, 0.0);
    const Grid f1 = smooth_pattern(n, n, 1.5);
    const Grid s0 = smooth_pattern(n, n, 0.0, 0.0), base0 = f0;
    // shift both frames by (3 rows, 5 cols) with periodic wrap
    auto roll = [n](const Grid& g, int64_t dr, int64_t dc) {
        Grid out({n, n});
        for (int64_t r = 0; r < n; ++r) {
            for (int64_t c = 0; c < n; ++c) {
                out[r * n + c] = g[((r - dr + n) % n) * n + ((c - dc + n) % n)];
            }
        }
        return out;
    };
    const FlowField flow = estimate_flow(f0, f1);
    const FlowField shifted = estimate_flow(roll(f0, 3, 5), roll(f1, 3, 5));
    double worst = 0.0;
    for (int64_t r = 10; r < n - 10; ++r) {
        for (int64_t c = 10; c < n - 10; ++c) {
            const int64_t rs = (r + 3) % n, cs = (c + 5) % n;
            if (rs < 10 || rs >= n - 10 || cs < 10 || cs >= n - 10) continue;
            worst = std::max(worst, static_cast<double>(std::fabs(
                                        flow.u[r * n + c] - shifted.u[rs * n + cs])));
            worst = std::max(worst, static_cast<double>(std::fabs(
                                        flow.v[r * n + c] - shifted.v[rs * n + cs])));
        }
    }
    CHECK(worst < 0.1);
    (void)s0;
    (void)base0;
}

TEST_CASE("solver energy is monotonically non-increasing") {
    const Grid f0 = smooth_pattern(32, 32, 0.0);
    const Grid f1 = smooth_pattern(32, 32, 1.0, 0.5);
    FlowDiagnostics diag;
    estimate_flow(f0, f1, FlowConfig{}, &diag);
    CHECK(!diag.energies.empty());
    for (const auto& trace : diag.energies) {
        REQUIRE(trace.size() > 1);
        for (size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1] * (1.0 + 1e-6) + 1e-9);
        }
    }
}

TEST_CASE("flow fields export as raw planes with a manifest entry") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() /
        ("nvgan_flow_" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);
    const Grid f0 = smooth_pattern(16, 16, 0.0);
    const Grid f1 = smooth_pattern(16, 16, 1.0);
    const FlowField flow = estimate_flow(f0, f1);
    export_flow_field(flow, dir, "probe");
    CHECK(fs::file_size(dir / "probe_u.raw") == 16 * 16 * sizeof(float));
    CHECK(fs::file_size(dir / "probe_v.raw") == 16 * 16 * sizeof(float));
    std::ifstream manifest(dir / "probe_flow.json");
    std::string text(std::istreambuf_iterator<char>(manifest),
                     std::istreambuf_iterator<char>{});
    CHECK(text.find("probe_u.raw") != std::string::npos);
    CHECK(text.find("pixels per step") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("flow rejects non-finite frames") {
    Grid f0 = smooth_pattern(16, 16, 0.0);
    Grid f1 = f0;
    f1[5] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(estimate_flow(f0, f1), DataError);
}

TEST_CASE("benchmark_quadrant scores the extrapolated forecast") {
    // RGB frames in dataset channel order, advecting uniformly
    const int64_t n = 32;
    Grid t0({3, n, n}), t1({3, n, n}), t2({3, n, n});
    for (int64_t c = 0; c < 3; ++c) {
        const Grid p0 = smooth_pattern(n, n, 0.0 + static_cast<double>(c));
        const Grid p1 = smooth_pattern(n, n, 2.0 + static_cast<double>(c));
        const Grid p2 = smooth_pattern(n, n, 4.0 + static_cast<double>(c));
        std::copy(p0.data.begin(), p0.data.end(), t0.data.begin() + c * n * n);
        std::copy(p1.data.begin(), p1.data.end(), t1.data.begin() + c * n * n);
        std::copy(p2.data.begin(), p2.data.end(), t2.data.begin() + c * n * n);
    }
    const RegionSpec quadrant = bottom_right_quadrant(n, n);
    // a synthetic guess equal to the benchmark itself scores zero error
    const FlowField flow = estimate_flow(t0, t1);
    const Grid benchmark = extrapolate(t1, flow, 1);
    const MetricsReport self = benchmark_quadrant(t0, t1, benchmark, quadrant);
    CHECK(self.mae == doctest::Approx(0.0));
    CHECK(std::isinf(self.psnr));
    // and the true frame is closer to the benchmark than a blank guess
    const MetricsReport truth_score = benchmark_quadrant(t0, t1, t2, quadrant);
    const MetricsReport blank_score = benchmark_quadrant(t0, t1, Grid({3, n, n}), quadrant);
    CHECK(truth_score.mae < blank_score.mae);
}
