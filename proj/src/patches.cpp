#include "csscan/patches.hpp"

#include <string>

namespace csscan {

std::pair<PatchGrid, std::vector<Patch>> extract_patches(const Image& image, const Mask& mask,
                                                         int patch_size, int stride) {
    if (!mask.same_shape(image))
        throw ValidationError("image and mask shapes differ");
    if (patch_size < 1) throw ValidationError("patch size must be >= 1");
    if (patch_size > image.height || patch_size > image.width)
        throw ValidationError("patch size " + std::to_string(patch_size) +
                              " exceeds image side");
    if (stride < 1) throw ValidationError("stride must be >= 1");

    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.stride = stride;
    grid.image_height = image.height;
    grid.image_width = image.width;
    for (int r = 0; r + patch_size <= image.height; r += stride)
        for (int c = 0; c + patch_size <= image.width; c += stride)
            grid.origins.emplace_back(r, c);

    const std::size_t px = static_cast<std::size_t>(patch_size) * patch_size;
    std::vector<Patch> patches(grid.origins.size());
    for (std::size_t i = 0; i < grid.origins.size(); ++i) {
        auto [r0, c0] = grid.origins[i];
        Patch& p = patches[i];
        p.row = r0;
        p.col = c0;
        p.values.resize(px);
        p.observed.resize(px);
        std::size_t k = 0;
        for (int r = r0; r < r0 + patch_size; ++r) {
            for (int c = c0; c < c0 + patch_size; ++c, ++k) {
                const bool obs = mask.at(r, c);
                p.observed[k] = obs ? 1 : 0;
                p.values[k] = obs ? image.at(r, c) : 0.0;
            }
        }
    }
    return {std::move(grid), std::move(patches)};
}

Image reassemble(const std::vector<Patch>& patches, const PatchGrid& grid) {
    if (patches.size() != grid.patch_count())
        throw ValidationError("patch list does not match grid");
    Image out(grid.image_height, grid.image_width, 0.0);
    std::vector<std::uint32_t> cover(out.size(), 0);

    const int B = grid.patch_size;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        auto [r0, c0] = grid.origins[i];
        const Patch& p = patches[i];
        std::size_t k = 0;
        for (int r = r0; r < r0 + B; ++r) {
            for (int c = c0; c < c0 + B; ++c, ++k) {
                out.at(r, c) += p.values[k];
                ++cover[static_cast<std::size_t>(r) * out.width + c];
            }
        }
    }
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (cover[j] == 0)
            throw ValidationError("reassemble: pixel " + std::to_string(j) +
                                  " covered by no patch (stride too large)");
        out.data[j] /= cover[j];
    }
    return out;
}

}  // namespace csscan
