#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "csscan/image.hpp"
#include "csscan/metrics.hpp"
#include "csscan/patches.hpp"
#include "csscan/rng.hpp"

using namespace csscan;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform01();
    return img;
}

}  // namespace

TEST_CASE("extract_patches: 4x4 image, B=3, full mask") {
    const Image img = random_image(4, 4, 1);
    auto [grid, patches] = extract_patches(img, Mask::full(4, 4), 3);
    CHECK(grid.patch_count() == 4);
    CHECK(patches.size() == 4);
    for (const auto& p : patches)
        for (auto obs : p.observed) CHECK(obs == 1);
    CHECK(grid.origins[0] == std::pair<int, int>{0, 0});
    CHECK(grid.origins[3] == std::pair<int, int>{1, 1});
}

TEST_CASE("extract_patches: 256x256 image, B=30 gives 227^2 patches") {
    const Image img(256, 256, 0.5);
    auto [grid, patches] = extract_patches(img, Mask::full(256, 256), 30);
    CHECK(grid.patch_count() == 51529);
    CHECK(patches.size() == 51529);
}

TEST_CASE("extract_patches: mask restriction zero-fills unobserved entries") {
    Image img(3, 3, 0.7);
    Mask mask = Mask::full(3, 3);
    mask.set(1, 1, false);
    auto [grid, patches] = extract_patches(img, mask, 3);
    REQUIRE(patches.size() == 1);
    int unobserved = 0;
    for (std::size_t j = 0; j < 9; ++j) {
        if (!patches[0].observed[j]) {
            ++unobserved;
            CHECK(patches[0].values[j] == 0.0);
        }
    }
    CHECK(unobserved == 1);
    CHECK(patches[0].observed[4] == 0);
}

TEST_CASE("extract_patches: validation") {
    const Image img = random_image(8, 8, 2);
    CHECK_THROWS_AS(extract_patches(img, Mask::full(8, 7), 3), ValidationError);
    CHECK_THROWS_AS(extract_patches(img, Mask::full(8, 8), 9), ValidationError);
    CHECK_THROWS_AS(extract_patches(img, Mask::full(8, 8), 3, 0), ValidationError);
}

TEST_CASE("patch-count law for stride 1") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int side = 4 + static_cast<int>(rng.uniform_below(28));
        const int b = 1 + static_cast<int>(rng.uniform_below(side));
        const Image img = random_image(side, side, 100 + trial);
        auto [grid, patches] = extract_patches(img, Mask::full(side, side), b);
        const std::size_t expect =
            static_cast<std::size_t>(side - b + 1) * (side - b + 1);
        CHECK(grid.patch_count() == expect);
    }
}

TEST_CASE("reassemble: single full-image patch is the identity") {
    const Image img = random_image(5, 5, 3);
    auto [grid, patches] = extract_patches(img, Mask::full(5, 5), 5);
    REQUIRE(patches.size() == 1);
    const Image out = reassemble(patches, grid);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(out.data[i] == doctest::Approx(img.data[i]));
}

TEST_CASE("reassemble: overlapping patches average") {
    // Two 2x2 patches over a 2x3 image share the middle column.
    PatchGrid grid;
    grid.patch_size = 2;
    grid.stride = 1;
    grid.image_height = 2;
    grid.image_width = 3;
    grid.origins = {{0, 0}, {0, 1}};
    std::vector<Patch> patches(2);
    patches[0].values = {0.2, 0.2, 0.2, 0.2};
    patches[1].values = {0.4, 0.4, 0.4, 0.4};
    for (auto& p : patches) p.observed.assign(4, 1);
    patches[0].row = 0;
    patches[0].col = 0;
    patches[1].row = 0;
    patches[1].col = 1;
    const Image out = reassemble(patches, grid);
    CHECK(out.at(0, 0) == doctest::Approx(0.2));
    CHECK(out.at(0, 1) == doctest::Approx(0.3));  // covered by both
    CHECK(out.at(0, 2) == doctest::Approx(0.4));
}

TEST_CASE("reassemble: round trip with full mask, many shapes") {
    Rng rng(4);
    for (int trial = 0; trial < 12; ++trial) {
        const int h = 6 + static_cast<int>(rng.uniform_below(20));
        const int w = 6 + static_cast<int>(rng.uniform_below(20));
        const int b = 2 + static_cast<int>(rng.uniform_below(std::min(h, w) - 1));
        const Image img = random_image(h, w, 500 + trial);
        auto [grid, patches] = extract_patches(img, Mask::full(h, w), b);
        const Image out = reassemble(patches, grid);
        for (std::size_t i = 0; i < img.size(); ++i)
            CHECK(std::abs(out.data[i] - img.data[i]) <= 1e-6);
    }
}

TEST_CASE("reassemble: uncovered pixel is an explicit error") {
    // 5 wide, B=2, stride 2: column 4 is never covered.
    const Image img = random_image(2, 5, 5);
    auto [grid, patches] = extract_patches(img, Mask::full(2, 5), 2, 2);
    CHECK_THROWS_AS(reassemble(patches, grid), ValidationError);
}

TEST_CASE("psnr: identical images give the infinity sentinel") {
    const Image img = random_image(6, 6, 6);
    CHECK(std::isinf(psnr(img, img, 1.0)));
}

TEST_CASE("psnr: uniform 0.1 error at peak 1 gives 20 dB") {
    Image a(4, 4, 0.4), b(4, 4, 0.5);
    CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr: matches brute-force double loop") {
    const Image a = random_image(8, 8, 7);
    const Image b = random_image(8, 8, 8);
    double sse = 0.0;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            const double d = a.at(r, c) - b.at(r, c);
            sse += d * d;
        }
    const double expect = 10.0 * std::log10(1.0 / (sse / 64.0));
    CHECK(std::abs(psnr(a, b, 1.0) - expect) <= 1e-9);
}

TEST_CASE("psnr: symmetry and shape validation") {
    const Image a = random_image(7, 5, 9);
    const Image b = random_image(7, 5, 10);
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)));
    CHECK_THROWS_AS(psnr(a, random_image(5, 7, 11)), ValidationError);
    CHECK_THROWS_AS(psnr(a, b, 0.0), ValidationError);
}

TEST_CASE("psnr decreases as independent noise grows") {
    const Image ref = random_image(16, 16, 12);
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {0.02, 0.05, 0.1, 0.2}) {
        double mean_psnr = 0.0;
        for (int s = 0; s < 10; ++s) {
            Rng rng(1000 + s);
            Image noisy = ref;
            for (double& v : noisy.data) v += sigma * rng.normal();
            mean_psnr += psnr(ref, noisy);
        }
        mean_psnr /= 10.0;
        CHECK(mean_psnr < prev);
        prev = mean_psnr;
    }
}

TEST_CASE("drift_matched_psnr: exact embedding is found") {
    Image candidate = random_image(24, 24, 13);
    const Image crop = [&] {
        Image c(8, 8);
        Rng rng(14);
        for (double& v : c.data) v = rng.uniform01();
        return c;
    }();
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) candidate.at(5 + r, 7 + c) = crop.at(r, c);
    const DriftMatch m = drift_matched_psnr(crop, candidate, 8);
    CHECK(m.row == 5);
    CHECK(m.col == 7);
    CHECK(std::isinf(m.psnr_db));
}

TEST_CASE("drift_matched_psnr: single window at full size") {
    const Image img = random_image(9, 9, 15);
    const DriftMatch m = drift_matched_psnr(img, img, 9);
    CHECK(m.row == 0);
    CHECK(m.col == 0);
    CHECK(std::isinf(m.psnr_db));
}

TEST_CASE("drift_matched_psnr: equals an independent brute-force scan") {
    const Image candidate = random_image(32, 32, 16);
    const Image ref = random_image(16, 16, 17);
    // Independent scan over all 17x17 offsets.
    double best = -1.0;
    int best_r = -1, best_c = -1;
    for (int r0 = 0; r0 <= 16; ++r0)
        for (int c0 = 0; c0 <= 16; ++c0) {
            double sse = 0.0;
            for (int r = 0; r < 16; ++r)
                for (int c = 0; c < 16; ++c) {
                    const double d = ref.at(r, c) - candidate.at(r0 + r, c0 + c);
                    sse += d * d;
                }
            const double v = 10.0 * std::log10(1.0 / (sse / 256.0));
            if (v > best) {
                best = v;
                best_r = r0;
                best_c = c0;
            }
        }
    const DriftMatch m = drift_matched_psnr(ref, candidate, 16);
    CHECK(m.psnr_db == doctest::Approx(best).epsilon(1e-12));
    CHECK(m.row == best_r);
    CHECK(m.col == best_c);
}

TEST_CASE("drift_matched_psnr is at least the fixed-offset psnr") {
    const Image candidate = random_image(20, 20, 18);
    const Image ref = random_image(10, 10, 19);
    Image window(10, 10);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 10; ++c) window.at(r, c) = candidate.at(r, c);
    CHECK(drift_matched_psnr(ref, candidate, 10).psnr_db >= psnr(ref, window));
}

TEST_CASE("drift_matched_psnr: crop larger than candidate is an error") {
    const Image candidate = random_image(8, 8, 20);
    const Image ref = random_image(12, 12, 21);
    CHECK_THROWS_AS(drift_matched_psnr(ref, candidate, 12), ValidationError);
}
