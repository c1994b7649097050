#include "csscan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace csscan {

LatticeKind lattice_from_name(const std::string& name) {
    if (name == "square") return LatticeKind::Square;
    if (name == "hex" || name == "hexagonal") return LatticeKind::Hexagonal;
    throw ValidationError("unknown lattice kind: " + name);
}

std::string lattice_name(LatticeKind k) {
    return k == LatticeKind::Square ? "square" : "hex";
}

void PhantomParams::validate() const {
    if (height < 4 || width < 4) throw ValidationError("phantom: size too small");
    if (!(spacing > 1.0)) throw ValidationError("phantom: spacing must be > 1");
    if (!(sigma > 0.0)) throw ValidationError("phantom: sigma must be > 0");
    if (contrast < 0.0 || background < 0.0 || background > 1.0)
        throw ValidationError("phantom: contrast/background out of range");
}

Image lattice_phantom(const PhantomParams& params) {
    params.validate();
    Image img(params.height, params.width, params.background);

    std::vector<std::pair<double, double>> centers;
    if (params.lattice == LatticeKind::Square) {
        for (double y = params.spacing / 2; y < params.height; y += params.spacing)
            for (double x = params.spacing / 2; x < params.width; x += params.spacing)
                centers.emplace_back(y, x);
    } else {
        const double row_step = params.spacing * std::sqrt(3.0) / 2.0;
        int row = 0;
        for (double y = params.spacing / 2; y < params.height; y += row_step, ++row) {
            const double shift = (row % 2 == 0) ? 0.0 : params.spacing / 2.0;
            for (double x = params.spacing / 2 + shift; x < params.width; x += params.spacing)
                centers.emplace_back(y, x);
        }
    }

    const double radius = 4.0 * params.sigma;
    const double inv2s2 = 1.0 / (2.0 * params.sigma * params.sigma);
    for (auto [cy, cx] : centers) {
        const int r0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
        const int r1 = std::min(params.height - 1, static_cast<int>(std::ceil(cy + radius)));
        const int c0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
        const int c1 = std::min(params.width - 1, static_cast<int>(std::ceil(cx + radius)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dy = r - cy;
                const double dx = c - cx;
                img.at(r, c) += params.contrast * std::exp(-(dy * dy + dx * dx) * inv2s2);
            }
        }
    }
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

}  // namespace csscan
