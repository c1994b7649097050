#ifndef CSSCAN_SAMPLING_HPP
#define CSSCAN_SAMPLING_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csscan/image.hpp"

namespace csscan {

enum class Scheme { Raster, Uds, LineHop };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

/// Ordered probe positions with dwell time. Positions are unique and in
/// bounds for every generator in this module; the order is the physical
/// traversal order, which the jump metrics are computed over.
struct SamplingPlan {
    int height = 0;
    int width = 0;
    std::vector<std::pair<int, int>> positions;
    double dwell_time_us = 0.0;
    Scheme scheme = Scheme::Raster;
    std::uint64_t seed = 0;

    std::size_t sample_count() const { return positions.size(); }
    /// Mask with exactly the pixels of `positions` set.
    Mask to_mask() const;
    void validate() const;
};

/// Line-hop tuning: maximum perpendicular deviation from the base line, the
/// per-column probability of moving the offset, and traversal direction.
struct LineHopParams {
    int hop_amplitude = 1;
    double hop_prob = 0.5;
    std::uint64_t seed = 0;
    bool serpentine = true;
};

/// Electron-exposure budget, proxied as dwell_time * sample_count
/// (microsecond-pixels, proportional to the total electron count).
struct DoseBudget {
    double reference_dwell_us = 0.0;
    double reference_samples = 0.0;

    double budget() const { return reference_dwell_us * reference_samples; }
    void validate() const;
};

/// Full row-major scan of all N pixels.
SamplingPlan raster_plan(int height, int width, double dwell_time_us);

/// Uniform density sampling: round(ratio*N) distinct positions drawn
/// uniformly without replacement, emitted in row-major order.
SamplingPlan uds_plan(int height, int width, double ratio, double dwell_time_us,
                      std::uint64_t seed);

/// Line hop sampling: round(ratio*H) evenly spaced base lines; along each
/// line the row offset performs a bounded +-1 random walk (flip probability
/// hop_prob, clamped to +-hop_amplitude), visiting every column once. Lines
/// alternate direction when params.serpentine. Bands must not overlap:
/// requires min base-line gap > 2*hop_amplitude.
SamplingPlan linehop_plan(int height, int width, double ratio, const LineHopParams& params,
                          double dwell_time_us);

/// Largest hop amplitude for which round(ratio*height) line-hop bands stay
/// disjoint (0 when even straight lines barely fit).
int max_feasible_hop(int height, double ratio);

struct PlanMetrics {
    int max_jump = 0;
    double mean_jump = 0.0;
    std::size_t overlap_count = 0;
};

/// Jump statistics over consecutive positions (Chebyshev distance, the scan
/// coil deflects in both axes) plus the duplicate-position count.
PlanMetrics plan_metrics(const SamplingPlan& plan);

/// Dwell time that spends the budget over M sampled pixels: budget / M.
/// M is real-valued so nominal ratios (e.g. 0.4 * 512^2) divide exactly.
double constrained_dwell(const DoseBudget& budget, double sample_count);

}  // namespace csscan

#endif
