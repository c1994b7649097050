#ifndef CSSCAN_PATCHES_HPP
#define CSSCAN_PATCHES_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "csscan/image.hpp"

namespace csscan {

/// One B x B window: zero-filled values plus the per-pixel observed flags
/// (the restriction of the acquisition mask to this window). Values at
/// unobserved positions are exactly 0; the observed bitmap, not the value,
/// is authoritative.
struct Patch {
    std::vector<double> values;
    std::vector<std::uint8_t> observed;
    int row = 0;
    int col = 0;
};

/// Layout of an overlapping patch decomposition: window size, stride and the
/// ordered window origins.
struct PatchGrid {
    int patch_size = 0;
    int stride = 1;
    int image_height = 0;
    int image_width = 0;
    std::vector<std::pair<int, int>> origins;

    std::size_t patch_count() const { return origins.size(); }
};

/// Extracts every B x B window whose origin lies on the stride lattice and
/// fits fully inside the image, together with the mask restriction. For
/// stride 1 on an H x W image this yields (H-B+1)(W-B+1) patches.
std::pair<PatchGrid, std::vector<Patch>> extract_patches(const Image& image, const Mask& mask,
                                                         int patch_size, int stride = 1);

/// Rebuilds an image from patch values by uniform averaging over all patches
/// covering each pixel. Throws if any pixel is covered by no patch (possible
/// when stride > 1).
Image reassemble(const std::vector<Patch>& patches, const PatchGrid& grid);

}  // namespace csscan

#endif
