#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "nvgan/dataset.hpp"
#include "nvgan/metrics.hpp"
#include "oracle/reference.hpp"

using namespace nvgan;
using testutil::random_grid;

namespace {

Image random_image(int64_t rows, int64_t cols, Pcg32& rng) {
    Image img(rows, cols);
    for (auto& v : img.rgb) v = static_cast<uint8_t>(rng.bounded(256));
    return img;
}

}  // namespace

TEST_CASE("mae and rmse anchors") {
    Grid a({2}, {0.0f, 1.0f});
    Grid b({2}, {1.0f, 3.0f});
    CHECK(mae(a, b) == doctest::Approx(1.5));
    Grid c({2}, {0.0f, 0.0f});
    Grid d({2}, {3.0f, 4.0f});
    CHECK(rmse(c, d) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-6));

    Pcg32 rng(3);
    const Grid x = random_grid({3, 8, 8}, rng);
    CHECK(mae(x, x) == 0.0);
    CHECK(rmse(x, x) == 0.0);
    Grid shifted = x;
    for (float& v : shifted.data) v += 0.25f;
    CHECK(mae(x, shifted) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(rmse(x, shifted) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK_THROWS_AS(mae(x, random_grid({3, 8, 9}, rng)), ShapeError);
}

TEST_CASE("psnr anchors") {
    Pcg32 rng(5);
    const Image img = random_image(8, 8, rng);
    CHECK(std::isinf(psnr(img, img)));
    Image plus_one = img;
    for (auto& v : plus_one.rgb) v = static_cast<uint8_t>(std::min(254, int(v)) + 1);
    Image base = img;
    for (auto& v : base.rgb) v = static_cast<uint8_t>(std::min(254, int(v)));
    CHECK(psnr(base, plus_one) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-9));
}

TEST_CASE("ssim anchors and symmetry") {
    Pcg32 rng(7);
    const Image img = random_image(16, 16, rng);
    CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));

    Image black(16, 16);
    Image white(16, 16);
    for (auto& v : white.rgb) v = 255;
    CHECK(ssim(black, white) < 0.01);

    const Image other = random_image(16, 16, rng);
    CHECK(ssim(img, other) == doctest::Approx(ssim(other, img)).epsilon(1e-12));

    SsimConfig big;
    big.window = 32;
    CHECK_THROWS_AS(ssim(img, other, big), ShapeError);
}

TEST_CASE("metrics match the brute-force oracle to 1e-6") {
    Pcg32 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Grid a = random_grid({3, 16, 16}, rng, 0.0f, 1.65f);
        const Grid b = random_grid({3, 16, 16}, rng, 0.0f, 1.65f);
        CHECK(mae(a, b) == doctest::Approx(refimpl::mae(a, b)).epsilon(1e-9));
        CHECK(rmse(a, b) == doctest::Approx(refimpl::rmse(a, b)).epsilon(1e-9));
        const Image ia = random_image(16, 16, rng);
        const Image ib = random_image(16, 16, rng);
        CHECK(psnr(ia, ib) == doctest::Approx(refimpl::psnr(ia, ib)).epsilon(1e-9));
        CHECK(ssim(ia, ib) == doctest::Approx(refimpl::ssim(ia, ib)).epsilon(1e-9));
    }
}

TEST_CASE("mae never exceeds rmse") {
    Pcg32 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid a = random_grid({2, 12, 12}, rng, -2.0f, 2.0f);
        const Grid b = random_grid({2, 12, 12}, rng, -2.0f, 2.0f);
        CHECK(mae(a, b) <= rmse(a, b) + 1e-12);
    }
}

TEST_CASE("identical permutations leave the metrics unchanged") {
    Pcg32 rng(13);
    const int64_t rows = 16, cols = 16;
    const Grid a = random_grid({3, rows, cols}, rng, 0.0f, 1.65f);
    const Grid b = random_grid({3, rows, cols}, rng, 0.0f, 1.65f);
    std::vector<int64_t> perm(static_cast<size_t>(rows * cols));
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int64_t>(i);
    Pcg32 shuffle_rng(14);
    shuffle_rng.shuffle(perm);
    Grid pa = a, pb = b;
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t i = 0; i < rows * cols; ++i) {
            pa[c * rows * cols + i] = a[c * rows * cols + perm[static_cast<size_t>(i)]];
            pb[c * rows * cols + i] = b[c * rows * cols + perm[static_cast<size_t>(i)]];
        }
    }
    CHECK(mae(pa, pb) == doctest::Approx(mae(a, b)).epsilon(1e-12));
    CHECK(rmse(pa, pb) == doctest::Approx(rmse(a, b)).epsilon(1e-12));
    const Image ia = albedo_to_image(a), ib = albedo_to_image(b);
    const Image ipa = albedo_to_image(pa), ipb = albedo_to_image(pb);
    CHECK(psnr(ipa, ipb) == doctest::Approx(psnr(ia, ib)).epsilon(1e-12));

    // SSIM is only window-permutation invariant: shuffle whole 8x8 tiles with
    // stride = window so the window set is preserved.
    SsimConfig tiles;
    tiles.window = 8;
    tiles.stride = 8;
    std::vector<int64_t> tile_perm = {3, 1, 2, 0};  // 2x2 arrangement of 8x8 tiles
    Grid ta = a, tb = b;
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t t = 0; t < 4; ++t) {
            const int64_t src = tile_perm[static_cast<size_t>(t)];
            const int64_t dr = (t / 2) * 8, dc = (t % 2) * 8;
            const int64_t sr = (src / 2) * 8, sc = (src % 2) * 8;
            for (int64_t r = 0; r < 8; ++r) {
                for (int64_t k = 0; k < 8; ++k) {
                    ta[(c * rows + dr + r) * cols + dc + k] =
                        a[(c * rows + sr + r) * cols + sc + k];
                    tb[(c * rows + dr + r) * cols + dc + k] =
                        b[(c * rows + sr + r) * cols + sc + k];
                }
            }
        }
    }
    CHECK(ssim(albedo_to_image(ta), albedo_to_image(tb), tiles) ==
          doctest::Approx(ssim(ia, ib, tiles)).epsilon(1e-12));
}

TEST_CASE("psnr decreases strictly as noise grows") {
    Pcg32 rng(17);
    const Grid clean = random_grid({3, 16, 16}, rng, 0.3f, 1.2f);
    const Image ic = albedo_to_image(clean);
    double previous = std::numeric_limits<double>::infinity();
    for (const float amp : {0.02f, 0.05f, 0.1f, 0.2f, 0.4f}) {
        Grid noisy = clean;
        Pcg32 noise_rng(18);
        for (float& v : noisy.data) {
            v = std::clamp(v + amp * (noise_rng.uniform() - 0.5f) * 2.0f, 0.0f, 1.65f);
        }
        const double value = psnr(ic, albedo_to_image(noisy));
        CHECK(value < previous);
        previous = value;
    }
}

TEST_CASE("masks restrict mae and rmse") {
    Pcg32 rng(19);
    const Grid a = random_grid({3, 8, 8}, rng);
    Grid b = a;
    // perturb only the top-left cell
    b[0] += 1.0f;
    Grid mask({8, 8});
    mask[0] = 1.0f;
    CHECK(mae(a, b, &mask) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    Grid empty_mask({8, 8});
    CHECK_THROWS_AS(mae(a, b, &empty_mask), ShapeError);
    Grid bad_mask({4, 4});
    bad_mask[0] = 1.0f;
    CHECK_THROWS_AS(mae(a, b, &bad_mask), ShapeError);
}

TEST_CASE("quadrant evaluation equals whole-grid evaluation on tiled content") {
    Pcg32 rng(21);
    const Grid qa = random_grid({3, 16, 16}, rng, 0.0f, 1.65f);
    const Grid qb = random_grid({3, 16, 16}, rng, 0.0f, 1.65f);
    // tile the quadrant 2x2 so every quadrant carries identical content
    Grid a({3, 32, 32}), b({3, 32, 32});
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t r = 0; r < 32; ++r) {
            for (int64_t k = 0; k < 32; ++k) {
                a[(c * 32 + r) * 32 + k] = qa[(c * 16 + r % 16) * 16 + k % 16];
                b[(c * 32 + r) * 32 + k] = qb[(c * 16 + r % 16) * 16 + k % 16];
            }
        }
    }
    const RegionSpec region = bottom_right_quadrant(32, 32);
    SsimConfig aligned;
    aligned.window = 8;
    aligned.stride = 8;
    const MetricsReport whole = evaluate(a, b, nullptr, 1.65f, aligned);
    const MetricsReport quad = evaluate(a, b, &region, 1.65f, aligned);
    CHECK(quad.mae == doctest::Approx(whole.mae).epsilon(1e-12));
    CHECK(quad.rmse == doctest::Approx(whole.rmse).epsilon(1e-12));
    CHECK(quad.psnr == doctest::Approx(whole.psnr).epsilon(1e-12));
    CHECK(quad.ssim == doctest::Approx(whole.ssim).epsilon(1e-12));
}

TEST_CASE("evaluate on identical inputs gives the identity row") {
    Pcg32 rng(23);
    const Grid y = random_grid({3, 16, 16}, rng, 0.0f, 1.65f);
    const MetricsReport report = evaluate(y, y);
    CHECK(report.mae == 0.0);
    CHECK(report.rmse == 0.0);
    CHECK(std::isinf(report.psnr));
    CHECK(report.ssim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.to_text().find("psnr=inf") != std::string::npos);
    CHECK(report.to_json().find("\"inf\"") != std::string::npos);
    CHECK(metrics_conventions().find("stride 4") != std::string::npos);
}
