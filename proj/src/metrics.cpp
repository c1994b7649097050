#include "csscan/metrics.hpp"

#include <cmath>
#include <limits>

namespace csscan {

double psnr(const Image& reference, const Image& test, double peak) {
    if (!reference.same_shape(test)) throw ValidationError("psnr: image shapes differ");
    if (!(peak > 0.0)) throw ValidationError("psnr: peak must be > 0");
    double sse = 0.0;
    for (std::size_t i = 0; i < reference.data.size(); ++i) {
        const double d = reference.data[i] - test.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(reference.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

DriftMatch drift_matched_psnr(const Image& reference_crop, const Image& candidate,
                              int crop_size, double peak) {
    if (reference_crop.height != crop_size || reference_crop.width != crop_size)
        throw ValidationError("drift_matched_psnr: reference crop is not crop_size^2");
    if (crop_size > candidate.height || crop_size > candidate.width)
        throw ValidationError("drift_matched_psnr: crop larger than candidate");

    // Smallest SSE wins; scanning in (row, col) order with strict improvement
    // gives the smallest-offset tie break for free.
    DriftMatch best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int r0 = 0; r0 + crop_size <= candidate.height; ++r0) {
        for (int c0 = 0; c0 + crop_size <= candidate.width; ++c0) {
            double sse = 0.0;
            for (int r = 0; r < crop_size; ++r) {
                const double* ref = &reference_crop.data[static_cast<std::size_t>(r) * crop_size];
                const double* win =
                    &candidate.data[static_cast<std::size_t>(r0 + r) * candidate.width + c0];
                for (int c = 0; c < crop_size; ++c) {
                    const double d = ref[c] - win[c];
                    sse += d * d;
                }
                if (sse >= best_sse) break;
            }
            if (sse < best_sse) {
                best_sse = sse;
                best.row = r0;
                best.col = c0;
            }
        }
    }
    const double n = static_cast<double>(crop_size) * crop_size;
    best.psnr_db = best_sse == 0.0 ? std::numeric_limits<double>::infinity()
                                   : 10.0 * std::log10(peak * peak / (best_sse / n));
    return best;
}

}  // namespace csscan
