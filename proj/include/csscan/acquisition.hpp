#ifndef CSSCAN_ACQUISITION_HPP
#define CSSCAN_ACQUISITION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "csscan/image.hpp"
#include "csscan/sampling.hpp"

namespace csscan {

enum class NoiseKind { None, Gaussian, Poisson };

std::string noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& name);

/// Detector noise model. base_sigma is the per-pixel standard deviation (in
/// normalized intensity units) at reference_dwell; at dwell t_d the Gaussian
/// std scales as base_sigma * sqrt(reference_dwell / t_d). Poisson mode draws
/// counts with mean truth * t_d * gain and renormalizes, with gain chosen so
/// the relative fluctuation at full intensity and reference dwell matches
/// base_sigma (gain = 1 / (base_sigma^2 * reference_dwell)).
struct NoiseSpec {
    NoiseKind kind = NoiseKind::None;
    double base_sigma = 0.0;
    double reference_dwell_us = 4.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// Gaussian std at the given dwell time.
    double sigma_at(double dwell_us) const;
};

/// A compressive acquisition: the zero-filled observed image, its mask, and
/// the plan + noise spec that produced it.
struct Observation {
    Image image;
    Mask mask;
    SamplingPlan plan;
    NoiseSpec noise;
};

/// Applies a sampling plan to a ground-truth image: sampled pixels carry the
/// truth value plus a noise realization, unsampled pixels are exactly zero.
Observation acquire(const Image& truth, const SamplingPlan& plan, const NoiseSpec& noise);

/// One element of a constrained-dose series.
struct DoseSeriesElement {
    double ratio = 0.0;
    double dwell_time_us = 0.0;
    Observation observation;
};

/// For each ratio, builds a line-hop plan whose dwell time spends the fixed
/// budget (dwell = budget / M) and acquires an observation. Per-element seeds
/// are derived from (seed, index), so elements are independent of evaluation
/// order. Hop amplitude is clamped per ratio to the largest feasible value.
std::vector<DoseSeriesElement> constrained_dose_series(const Image& truth,
                                                       const std::vector<double>& ratios,
                                                       const DoseBudget& budget,
                                                       const LineHopParams& params,
                                                       const NoiseSpec& noise,
                                                       std::uint64_t seed);

/// Shifts an image by an integer offset, filling vacated pixels with the
/// edge value. Exists to exercise drift-matched evaluation; acquisition does
/// not simulate drift by default.
Image shift_image(const Image& img, int row_shift, int col_shift);

}  // namespace csscan

#endif
