#ifndef CSSCAN_IMAGE_HPP
#define CSSCAN_IMAGE_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "csscan/errors.hpp"

namespace csscan {

/// Dense 2-D grid of real intensities, row-major. Ground-truth images are
/// normalized to [0,1]; `peak` records the scale the data was normalized by
/// (1.0 for synthetic images, the PGM maxval for loaded ones). Noisy
/// observations reuse this container and may carry values outside [0,1];
/// validate_normalized() is the loader/generator contract, not a structural
/// invariant of every instance.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;
    double peak = 1.0;

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {
        if (h < 1 || w < 1) throw ValidationError("image dimensions must be positive");
    }

    std::size_t size() const { return data.size(); }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width;
    }

    /// Checks the normalized-image contract: finite data in [0,1].
    void validate_normalized() const;
    /// Checks only finiteness (observations with noise).
    void validate_finite() const;
};

/// Boolean sampling mask over an image grid. `sampled[i]` is true where the
/// probe visited pixel i (the set Omega of the masked sensing model).
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> sampled;

    Mask() = default;
    Mask(int h, int w, bool fill = false)
        : height(h), width(w), sampled(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {
        if (h < 1 || w < 1) throw ValidationError("mask dimensions must be positive");
    }

    std::size_t size() const { return sampled.size(); }
    bool at(int r, int c) const {
        return sampled[static_cast<std::size_t>(r) * width + c] != 0;
    }
    void set(int r, int c, bool v) {
        sampled[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0;
    }
    /// Number of sampled pixels M.
    std::size_t count() const;
    bool same_shape(const Image& img) const {
        return height == img.height && width == img.width;
    }

    static Mask full(int h, int w) { return Mask(h, w, true); }
};

}  // namespace csscan

#endif
