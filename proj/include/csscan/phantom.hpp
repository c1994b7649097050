#ifndef CSSCAN_PHANTOM_HPP
#define CSSCAN_PHANTOM_HPP

#include <string>

#include "csscan/image.hpp"

namespace csscan {

enum class LatticeKind { Square, Hexagonal };

LatticeKind lattice_from_name(const std::string& name);
std::string lattice_name(LatticeKind k);

/// Synthetic ground truth: a lattice of Gaussian blobs over a flat
/// background, a stand-in for atomic-resolution nanoparticle images.
struct PhantomParams {
    int height = 128;
    int width = 128;
    LatticeKind lattice = LatticeKind::Square;
    double spacing = 16.0;   // lattice constant, pixels
    double sigma = 2.8;      // blob width, pixels
    double contrast = 0.85;  // blob peak above background
    double background = 0.08;

    void validate() const;
};

Image lattice_phantom(const PhantomParams& params);

}  // namespace csscan

#endif
