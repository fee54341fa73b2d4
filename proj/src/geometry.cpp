#include "replan/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "replan/rng.hpp"

namespace replan {

ImageGeometry::ImageGeometry(int width, int height, int patch_size)
    : width(width), height(height), patch_size(patch_size) {
    if (width < 1 || height < 1) throw GeometryError("image dimensions must be >= 1");
    if (patch_size < 1) throw GeometryError("patch size must be >= 1");
}

PixelBox ImageGeometry::patch_rect(int i, int j) const {
    PixelBox r;
    r.x1 = j * patch_size;
    r.y1 = i * patch_size;
    r.x2 = std::min((j + 1) * patch_size, width);
    r.y2 = std::min((i + 1) * patch_size, height);
    return r;
}

std::vector<PatchCoord> map_bbox_to_patches(const PixelBox& bbox, const ImageGeometry& geom) {
    if (bbox.x1 < 0 || bbox.y1 < 0 || bbox.x2 > geom.width || bbox.y2 > geom.height) {
        throw GeometryError("bbox exceeds image bounds");
    }
    if (bbox.x1 >= bbox.x2 || bbox.y1 >= bbox.y2) {
        throw GeometryError("bbox has no area");
    }

    // any positive overlap; patch extents are half-open pixel ranges
    const int i0 = bbox.y1 / geom.patch_size;
    const int i1 = (bbox.y2 - 1) / geom.patch_size;
    const int j0 = bbox.x1 / geom.patch_size;
    const int j1 = (bbox.x2 - 1) / geom.patch_size;

    std::vector<PatchCoord> out;
    out.reserve(static_cast<size_t>(i1 - i0 + 1) * static_cast<size_t>(j1 - j0 + 1));
    for (int i = i0; i <= i1; ++i) {
        for (int j = j0; j <= j1; ++j) {
            out.push_back({i, j});
        }
    }
    return out;
}

PixelBox perturb_bbox(const PixelBox& bbox, double ratio, const ImageGeometry& geom, uint64_t seed) {
    if (ratio < 0.0) throw DomainError("perturbation ratio must be >= 0");

    const long long dx = std::llround(ratio * bbox.width());
    const long long dy = std::llround(ratio * bbox.height());

    SplitMix64 rng(seed);
    const long long sx1 = rng.coin() ? 1 : -1;
    const long long sy1 = rng.coin() ? 1 : -1;
    const long long sx2 = rng.coin() ? 1 : -1;
    const long long sy2 = rng.coin() ? 1 : -1;

    long long x1 = bbox.x1 + sx1 * dx;
    long long y1 = bbox.y1 + sy1 * dy;
    long long x2 = bbox.x2 + sx2 * dx;
    long long y2 = bbox.y2 + sy2 * dy;

    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);

    PixelBox out;
    out.x1 = static_cast<int>(std::clamp<long long>(x1, 0, geom.width));
    out.x2 = static_cast<int>(std::clamp<long long>(x2, 0, geom.width));
    out.y1 = static_cast<int>(std::clamp<long long>(y1, 0, geom.height));
    out.y2 = static_cast<int>(std::clamp<long long>(y2, 0, geom.height));

    if (out.x1 >= out.x2 || out.y1 >= out.y2) {
        throw DegenerateBoxError("perturbed bbox collapsed to zero area");
    }
    return out;
}

} // namespace replan
