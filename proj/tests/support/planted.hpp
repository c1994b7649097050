#ifndef CSSCAN_TESTS_PLANTED_HPP
#define CSSCAN_TESTS_PLANTED_HPP

// Planted-dictionary data generator: images whose non-overlapping B x B
// tiles are exact draws from the BPFA generative model, affinely mapped
// into [0.05, 0.95]. With per-patch mean subtraction the mapped tiles are
// still exact draws from a (mean-removed, rescaled) 3-atom model, so
// inference should recover the planted structure.

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>

#include "csscan/image.hpp"
#include "csscan/rng.hpp"

namespace csscan::testing {

struct PlantedData {
    Image image;
    Eigen::MatrixXd atoms;     // B^2 x K0, before the affine map
    Eigen::MatrixXd weights;   // K0 x tiles (z .* w)
    int tile_count = 0;
};

inline PlantedData planted_image(int side, int patch_size, int planted_atoms,
                                 double usage_prob, std::uint64_t seed) {
    const int tiles_per_side = side / patch_size;
    const int tiles = tiles_per_side * tiles_per_side;
    const int px = patch_size * patch_size;

    Rng rng(seed);
    PlantedData out;
    out.tile_count = tiles;
    out.atoms.resize(px, planted_atoms);
    const double atom_sd = 1.0 / patch_size;
    for (int k = 0; k < planted_atoms; ++k)
        for (int p = 0; p < px; ++p) out.atoms(p, k) = atom_sd * rng.normal();

    out.weights = Eigen::MatrixXd::Zero(planted_atoms, tiles);
    for (int t = 0; t < tiles; ++t)
        for (int k = 0; k < planted_atoms; ++k)
            if (rng.bernoulli(usage_prob)) out.weights(k, t) = rng.normal();

    const Eigen::MatrixXd tiles_mat = out.atoms * out.weights;  // px x tiles
    const double lo = tiles_mat.minCoeff();
    const double hi = tiles_mat.maxCoeff();
    const double span = std::max(hi - lo, 1e-9);
    const double scale = 0.9 / span;
    const double offset = 0.05 - scale * lo;

    out.image = Image(side, side, 0.0);
    for (int t = 0; t < tiles; ++t) {
        const int r0 = (t / tiles_per_side) * patch_size;
        const int c0 = (t % tiles_per_side) * patch_size;
        for (int p = 0; p < px; ++p) {
            const int r = r0 + p / patch_size;
            const int c = c0 + p % patch_size;
            out.image.at(r, c) = scale * tiles_mat(p, t) + offset;
        }
    }
    return out;
}

}  // namespace csscan::testing

#endif
