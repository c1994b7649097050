#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "csscan/io.hpp"
#include "csscan/phantom.hpp"
#include "csscan/rng.hpp"

using namespace csscan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("csscan_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform01();
    return img;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace

TEST_CASE("PGM round trip at 8 and 16 bits") {
    TempDir tmp;
    const Image img = random_image(9, 13, 1);
    for (int bits : {8, 16}) {
        const fs::path p = tmp.path / ("img" + std::to_string(bits) + ".pgm");
        write_pgm(img, p, bits);
        const Image back = read_pgm(p);
        CHECK(back.height == 9);
        CHECK(back.width == 13);
        CHECK(back.peak == doctest::Approx((1 << bits) - 1));
        const double quantum = 1.0 / ((1 << bits) - 1);
        for (std::size_t i = 0; i < img.size(); ++i)
            CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 * quantum + 1e-12);
    }
}

TEST_CASE("PGM header comments are skipped") {
    TempDir tmp;
    const fs::path p = tmp.path / "commented.pgm";
    std::string raw = "P5\n# a comment\n2 2\n255\n";
    raw += '\x10';
    raw += '\x20';
    raw += '\x30';
    raw += '\x40';
    write_file_atomic(p, raw);
    const Image img = read_pgm(p);
    CHECK(img.at(0, 0) == doctest::Approx(16.0 / 255.0));
    CHECK(img.at(1, 1) == doctest::Approx(64.0 / 255.0));
}

TEST_CASE("raw CSIM image round trip") {
    TempDir tmp;
    const Image img = random_image(7, 5, 2);
    const fs::path p = tmp.path / "img.raw";
    write_raw_image(img, p);
    const std::string bytes = slurp(p);
    CHECK(bytes.size() == 16 + 7 * 5 * 4);
    CHECK(bytes.substr(0, 4) == "CSIM");
    const Image back = read_raw_image(p);
    CHECK(back.height == 7);
    CHECK(back.width == 5);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-7));
    CHECK_THROWS_AS(read_raw_image(tmp.path / "missing.raw"), ValidationError);
}

TEST_CASE("PBM mask round trip, including non-byte-aligned widths") {
    TempDir tmp;
    for (int w : {8, 11, 16, 3}) {
        Mask mask(5, w, false);
        Rng rng(30 + w);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < w; ++c) mask.set(r, c, rng.bernoulli(0.4));
        const fs::path p = tmp.path / ("m" + std::to_string(w) + ".pbm");
        write_pbm(mask, p);
        const Mask back = read_pbm(p);
        CHECK(back.sampled == mask.sampled);
    }
}

TEST_CASE("mask index list round trip") {
    TempDir tmp;
    Mask mask(6, 4, false);
    mask.set(0, 0, true);
    mask.set(5, 3, true);
    mask.set(2, 1, true);
    const fs::path p = tmp.path / "mask.txt";
    write_mask_index_list(mask, p);
    const Mask back = read_mask_index_list(p);
    CHECK(back.sampled == mask.sampled);
    CHECK(back.count() == 3);
}

TEST_CASE("plan file round trip preserves traversal order and header") {
    TempDir tmp;
    LineHopParams params;
    params.seed = 77;
    const SamplingPlan plan = linehop_plan(32, 16, 0.25, params, 12.5);
    const fs::path p = tmp.path / "plan.txt";
    write_plan(plan, p);

    const std::string first_line = slurp(p).substr(0, slurp(p).find('\n'));
    CHECK(first_line == "32 16 128 12.5 linehop 77");

    const SamplingPlan back = read_plan(p);
    CHECK(back.positions == plan.positions);
    CHECK(back.dwell_time_us == plan.dwell_time_us);
    CHECK(back.scheme == plan.scheme);
    CHECK(back.seed == plan.seed);

    // Re-serialization is byte-identical.
    const fs::path q = tmp.path / "plan2.txt";
    write_plan(back, q);
    CHECK(slurp(p) == slurp(q));
}

TEST_CASE("dictionary snapshot round trip") {
    TempDir tmp;
    BpfaState state;
    const int K = 5, px = 9;
    state.dictionary.resize(px, K);
    Rng rng(4);
    for (int k = 0; k < K; ++k)
        for (int p = 0; p < px; ++p) state.dictionary(p, k) = rng.normal();
    state.pi.resize(K);
    for (int k = 0; k < K; ++k) state.pi[k] = rng.uniform01();
    state.gamma_n = 123.5;
    state.gamma_w = 0.75;

    const fs::path p = tmp.path / "dict.bpfa";
    write_dictionary_snapshot(state, p);
    const std::string bytes = slurp(p);
    CHECK(bytes.size() == 28 + 8 * (K * px + K));
    CHECK(bytes.substr(0, 4) == "BPFA");

    const BpfaState back = read_dictionary_snapshot(p);
    CHECK(back.dictionary == state.dictionary);
    CHECK(back.pi == state.pi);
    CHECK(back.gamma_n == state.gamma_n);
    CHECK(back.gamma_w == state.gamma_w);
}

TEST_CASE("trace CSV schema") {
    TempDir tmp;
    Trace trace;
    trace.push_back({0, -12.5, 3, 0.25, 10.0});
    trace.push_back({1, -10.0, 4, 0.3, 11.0});
    const fs::path p = tmp.path / "trace.csv";
    write_trace_csv(trace, p);
    const std::string text = slurp(p);
    CHECK(text.rfind("epoch,objective,active_atoms,mean_pi,wall_ms\n", 0) == 0);
    CHECK(text.find("0,-12.5,3,0.25,10\n") != std::string::npos);
}

TEST_CASE("manifest round trip keeps order and values") {
    TempDir tmp;
    Manifest m;
    m.set("command", "plan");
    m.set("ratio", 0.25);
    m.set("seed", std::uint64_t{42});
    const fs::path p = tmp.path / "manifest.txt";
    m.write(p);
    const Manifest back = Manifest::read(p);
    CHECK(back.get("command") == "plan");
    CHECK(back.get("ratio") == "0.25");
    CHECK(back.get("seed") == "42");
    CHECK(!back.has("missing"));
    CHECK_THROWS_AS(back.get("missing"), ValidationError);
}

TEST_CASE("format_double round trips exactly") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double v = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform_below(12));
        CHECK(std::stod(format_double(v)) == v);
    }
}
