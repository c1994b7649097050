#include "csscan/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include "csscan/rng.hpp"

namespace csscan {

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Raster: return "raster";
        case Scheme::Uds: return "uds";
        case Scheme::LineHop: return "linehop";
    }
    return "raster";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "raster") return Scheme::Raster;
    if (name == "uds") return Scheme::Uds;
    if (name == "linehop") return Scheme::LineHop;
    throw ValidationError("unknown sampling scheme: " + name);
}

Mask SamplingPlan::to_mask() const {
    Mask m(height, width, false);
    for (auto [r, c] : positions) m.set(r, c, true);
    return m;
}

void SamplingPlan::validate() const {
    if (height < 1 || width < 1) throw ValidationError("plan dimensions must be positive");
    if (positions.size() > static_cast<std::size_t>(height) * width)
        throw ValidationError("plan has more positions than pixels");
    for (auto [r, c] : positions)
        if (r < 0 || r >= height || c < 0 || c >= width)
            throw ValidationError("plan position out of bounds");
}

void DoseBudget::validate() const {
    if (!(reference_dwell_us > 0.0) || !(reference_samples > 0.0))
        throw ValidationError("dose budget requires positive reference dwell and pixel count");
}

namespace {

void check_ratio(double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) throw ValidationError("ratio out of range (0,1]");
}

}  // namespace

SamplingPlan raster_plan(int height, int width, double dwell_time_us) {
    if (height < 1 || width < 1) throw ValidationError("raster_plan: dimensions must be >= 1");
    SamplingPlan plan;
    plan.height = height;
    plan.width = width;
    plan.dwell_time_us = dwell_time_us;
    plan.scheme = Scheme::Raster;
    plan.positions.reserve(static_cast<std::size_t>(height) * width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) plan.positions.emplace_back(r, c);
    return plan;
}

SamplingPlan uds_plan(int height, int width, double ratio, double dwell_time_us,
                      std::uint64_t seed) {
    if (height < 1 || width < 1) throw ValidationError("uds_plan: dimensions must be >= 1");
    check_ratio(ratio);
    const std::size_t n = static_cast<std::size_t>(height) * width;
    const std::size_t m = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(n)));
    if (m < 1) throw ValidationError("uds_plan: ratio rounds to zero samples");

    // Partial Fisher-Yates: first m entries are a uniform sample without
    // replacement.
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(m);
    std::sort(idx.begin(), idx.end());

    SamplingPlan plan;
    plan.height = height;
    plan.width = width;
    plan.dwell_time_us = dwell_time_us;
    plan.scheme = Scheme::Uds;
    plan.seed = seed;
    plan.positions.reserve(m);
    for (auto flat : idx)
        plan.positions.emplace_back(static_cast<int>(flat / width),
                                    static_cast<int>(flat % width));
    return plan;
}

namespace {

std::vector<int> base_lines(int height, int line_count) {
    // Centers of line_count equal-height strips.
    std::vector<int> bases(line_count);
    for (int j = 0; j < line_count; ++j) {
        const double center = (j + 0.5) * static_cast<double>(height) / line_count - 0.5;
        bases[j] = std::clamp(static_cast<int>(std::lround(center)), 0, height - 1);
    }
    return bases;
}

}  // namespace

int max_feasible_hop(int height, double ratio) {
    check_ratio(ratio);
    const int lines = static_cast<int>(std::lround(ratio * height));
    if (lines < 1) return 0;
    if (lines == 1) return height >= 3 ? (height - 1) / 2 : 0;
    const auto bases = base_lines(height, lines);
    int min_gap = height;
    for (int j = 1; j < lines; ++j) min_gap = std::min(min_gap, bases[j] - bases[j - 1]);
    int edge = std::min(bases.front(), height - 1 - bases.back());
    return std::max(0, std::min((min_gap - 1) / 2, edge));
}

SamplingPlan linehop_plan(int height, int width, double ratio, const LineHopParams& params,
                          double dwell_time_us) {
    if (height < 1 || width < 1) throw ValidationError("linehop_plan: dimensions must be >= 1");
    check_ratio(ratio);
    if (params.hop_amplitude < 0) throw ValidationError("hop amplitude must be >= 0");
    if (params.hop_prob < 0.0 || params.hop_prob > 1.0)
        throw ValidationError("hop probability must be in [0,1]");

    const int lines = static_cast<int>(std::lround(ratio * height));
    if (lines < 1) throw ValidationError("linehop_plan: ratio implies zero lines");
    const auto bases = base_lines(height, lines);
    const int h = params.hop_amplitude;
    for (int j = 1; j < lines; ++j) {
        if (bases[j] - bases[j - 1] <= 2 * h)
            throw ValidationError("linehop_plan: band overlap (line spacing <= 2h)");
    }

    SamplingPlan plan;
    plan.height = height;
    plan.width = width;
    plan.dwell_time_us = dwell_time_us;
    plan.scheme = Scheme::LineHop;
    plan.seed = params.seed;
    plan.positions.reserve(static_cast<std::size_t>(lines) * width);

    Rng rng(params.seed);
    for (int j = 0; j < lines; ++j) {
        const int base = bases[j];
        const int lo = std::max(0, base - h);
        const int hi = std::min(height - 1, base + h);
        int delta = 0;
        const bool reversed = params.serpentine && (j % 2 == 1);
        for (int step = 0; step < width; ++step) {
            const int c = reversed ? width - 1 - step : step;
            const int row = std::clamp(base + delta, lo, hi);
            plan.positions.emplace_back(row, c);
            if (h > 0 && rng.bernoulli(params.hop_prob)) {
                delta += rng.bernoulli(0.5) ? 1 : -1;
                delta = std::clamp(delta, -h, h);
            }
        }
    }
    return plan;
}

PlanMetrics plan_metrics(const SamplingPlan& plan) {
    if (plan.positions.size() < 2)
        throw ValidationError("plan_metrics: plan is empty or has a single position");
    PlanMetrics m;
    double total = 0.0;
    for (std::size_t i = 1; i < plan.positions.size(); ++i) {
        const int dr = std::abs(plan.positions[i].first - plan.positions[i - 1].first);
        const int dc = std::abs(plan.positions[i].second - plan.positions[i - 1].second);
        const int jump = std::max(dr, dc);
        m.max_jump = std::max(m.max_jump, jump);
        total += jump;
    }
    m.mean_jump = total / static_cast<double>(plan.positions.size() - 1);

    std::set<std::pair<int, int>> seen;
    for (auto& p : plan.positions)
        if (!seen.insert(p).second) ++m.overlap_count;
    return m;
}

double constrained_dwell(const DoseBudget& budget, double sample_count) {
    budget.validate();
    if (!(sample_count >= 1.0))
        throw ValidationError("constrained_dwell: sample count must be >= 1");
    return budget.budget() / sample_count;
}

}  // namespace csscan
