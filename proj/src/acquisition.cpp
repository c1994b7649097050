#include "csscan/acquisition.hpp"

#include <algorithm>
#include <cmath>

#include "csscan/rng.hpp"

namespace csscan {

std::string noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::None: return "none";
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Poisson: return "poisson";
    }
    return "none";
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "none") return NoiseKind::None;
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "poisson") return NoiseKind::Poisson;
    throw ValidationError("unknown noise kind: " + name);
}

void NoiseSpec::validate() const {
    if (base_sigma < 0.0) throw ValidationError("noise base_sigma must be >= 0");
    if (kind != NoiseKind::None && !(reference_dwell_us > 0.0))
        throw ValidationError("noise reference dwell must be > 0");
}

double NoiseSpec::sigma_at(double dwell_us) const {
    if (kind == NoiseKind::None || base_sigma == 0.0) return 0.0;
    return base_sigma * std::sqrt(reference_dwell_us / dwell_us);
}

Observation acquire(const Image& truth, const SamplingPlan& plan, const NoiseSpec& noise) {
    if (plan.height != truth.height || plan.width != truth.width)
        throw ValidationError("acquire: plan and image dimensions differ");
    noise.validate();
    truth.validate_finite();

    Observation obs;
    obs.plan = plan;
    obs.noise = noise;
    obs.mask = plan.to_mask();
    obs.image = Image(truth.height, truth.width, 0.0);
    obs.image.peak = truth.peak;

    Rng rng(noise.seed);
    switch (noise.kind) {
        case NoiseKind::None: {
            for (auto [r, c] : plan.positions) obs.image.at(r, c) = truth.at(r, c);
            break;
        }
        case NoiseKind::Gaussian: {
            const double sigma = noise.sigma_at(plan.dwell_time_us);
            for (auto [r, c] : plan.positions)
                obs.image.at(r, c) = truth.at(r, c) + sigma * rng.normal();
            break;
        }
        case NoiseKind::Poisson: {
            if (!(noise.base_sigma > 0.0))
                throw ValidationError("poisson noise needs base_sigma > 0");
            // Counts per unit intensity per microsecond; matches the Gaussian
            // model's relative fluctuation at intensity 1 and reference dwell.
            const double gain =
                1.0 / (noise.base_sigma * noise.base_sigma * noise.reference_dwell_us);
            const double exposure = gain * plan.dwell_time_us;
            for (auto [r, c] : plan.positions) {
                const double t = truth.at(r, c);
                if (t < 0.0)
                    throw ValidationError("poisson noise requires nonnegative intensities");
                obs.image.at(r, c) =
                    static_cast<double>(rng.poisson(t * exposure)) / exposure;
            }
            break;
        }
    }
    return obs;
}

std::vector<DoseSeriesElement> constrained_dose_series(const Image& truth,
                                                       const std::vector<double>& ratios,
                                                       const DoseBudget& budget,
                                                       const LineHopParams& params,
                                                       const NoiseSpec& noise,
                                                       std::uint64_t seed) {
    if (ratios.empty()) throw ValidationError("constrained_dose_series: no ratios given");
    budget.validate();

    std::vector<DoseSeriesElement> series;
    series.reserve(ratios.size());
    for (std::size_t idx = 0; idx < ratios.size(); ++idx) {
        const double ratio = ratios[idx];
        LineHopParams p = params;
        p.hop_amplitude = std::min(params.hop_amplitude, max_feasible_hop(truth.height, ratio));
        p.seed = derive_seed(seed, 0x706c616eull, idx);  // "plan"
        // Dwell from the nominal line-hop pixel count; rounding of the line
        // count makes the realized M differ slightly, which the caller can
        // read back from the plan.
        SamplingPlan probe = linehop_plan(truth.height, truth.width, ratio, p, 0.0);
        const double dwell =
            constrained_dwell(budget, static_cast<double>(probe.sample_count()));
        probe.dwell_time_us = dwell;

        NoiseSpec n = noise;
        n.seed = derive_seed(seed, 0x6e6f697365ull, idx);  // "noise"
        DoseSeriesElement elem;
        elem.ratio = ratio;
        elem.dwell_time_us = dwell;
        elem.observation = acquire(truth, probe, n);
        series.push_back(std::move(elem));
    }
    return series;
}

Image shift_image(const Image& img, int row_shift, int col_shift) {
    Image out(img.height, img.width, 0.0);
    out.peak = img.peak;
    for (int r = 0; r < img.height; ++r) {
        const int src_r = std::clamp(r - row_shift, 0, img.height - 1);
        for (int c = 0; c < img.width; ++c) {
            const int src_c = std::clamp(c - col_shift, 0, img.width - 1);
            out.at(r, c) = img.at(src_r, src_c);
        }
    }
    return out;
}

}  // namespace csscan
