#ifndef CSSCAN_METRICS_HPP
#define CSSCAN_METRICS_HPP

#include "csscan/image.hpp"

namespace csscan {

/// Peak signal-to-noise ratio, 10*log10(peak^2 / MSE), in dB.
/// Returns +infinity when the images are identical (MSE = 0).
double psnr(const Image& reference, const Image& test, double peak = 1.0);

struct DriftMatch {
    double psnr_db = 0.0;
    int row = 0;
    int col = 0;
};

/// Exhaustive integer-offset registration: evaluates the PSNR between
/// `reference_crop` (crop_size x crop_size) and every crop_size x crop_size
/// window of `candidate`, returning the best value and its offset. Ties break
/// toward the smallest (row, col) offset, so the result is deterministic.
DriftMatch drift_matched_psnr(const Image& reference_crop, const Image& candidate,
                              int crop_size, double peak = 1.0);

}  // namespace csscan

#endif
