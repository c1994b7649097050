#include "csscan/image.hpp"

#include <cmath>
#include <numeric>

namespace csscan {

void Image::validate_normalized() const {
    if (data.size() != static_cast<std::size_t>(height) * width)
        throw ValidationError("image data length does not match height*width");
    for (double v : data) {
        if (!std::isfinite(v)) throw ValidationError("image contains non-finite intensity");
        if (v < 0.0 || v > 1.0)
            throw ValidationError("normalized image intensity outside [0,1]");
    }
}

void Image::validate_finite() const {
    if (data.size() != static_cast<std::size_t>(height) * width)
        throw ValidationError("image data length does not match height*width");
    for (double v : data)
        if (!std::isfinite(v)) throw ValidationError("image contains non-finite intensity");
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto v : sampled) n += v != 0;
    return n;
}

}  // namespace csscan
