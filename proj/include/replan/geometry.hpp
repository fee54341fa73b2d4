#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "replan/plan.hpp"

namespace replan {

// Latent patch grid over a pixel image. Rows/cols use ceiling division, so
// the last row/column of patches may be ragged.
struct ImageGeometry {
    int width = 0;
    int height = 0;
    int patch_size = 0;

    ImageGeometry() = default;
    ImageGeometry(int width, int height, int patch_size);

    int rows() const { return (height + patch_size - 1) / patch_size; }
    int cols() const { return (width + patch_size - 1) / patch_size; }
    int patch_count() const { return rows() * cols(); }

    // pixel rectangle of patch (i,j), clipped to the image
    PixelBox patch_rect(int i, int j) const;

    bool operator==(const ImageGeometry&) const = default;
};

struct PatchCoord {
    int i = 0; // grid row
    int j = 0; // grid col

    auto operator<=>(const PatchCoord&) const = default;
};

// Every patch whose pixel rectangle has strictly positive intersection area
// with the bbox (any-overlap rule). Non-empty for any valid bbox. Throws
// GeometryError when the bbox is degenerate or exceeds the image.
std::vector<PatchCoord> map_bbox_to_patches(const PixelBox& bbox, const ImageGeometry& geom);

// Corner noise: each of x1,y1,x2,y2 moves by a signed offset whose magnitude
// is round(ratio * bbox width) for x and round(ratio * bbox height) for y,
// signs drawn independently from the seed. Corners are reordered so x1<=x2,
// y1<=y2, then clamped to the image. Throws DegenerateBoxError when the
// result collapses to zero area.
PixelBox perturb_bbox(const PixelBox& bbox, double ratio, const ImageGeometry& geom, uint64_t seed);

} // namespace replan
