#include "segrank/mask.hpp"

#include <algorithm>

namespace segrank::metrics {

std::uint64_t BinaryMask::count() const {
    std::uint64_t n = 0;
    for (std::uint8_t b : bits)
        n += b;
    return n;
}

BinaryMask extract_mask(const io::LabelVolume& volume, const io::LabelScheme& scheme, int code) {
    if (!scheme.contains(code))
        throw UnknownLabel("code " + std::to_string(code) + " is not in the label scheme");
    BinaryMask mask;
    mask.dims = volume.dims;
    mask.bits.resize(volume.voxels.size());
    for (std::size_t i = 0; i < volume.voxels.size(); ++i)
        mask.bits[i] = volume.voxels[i] == code ? 1 : 0;
    return mask;
}

SurfaceSet boundary(const BinaryMask& mask) {
    SurfaceSet surface;
    const auto [nx, ny, nz] = mask.dims;
    for (std::int32_t z = 0; z < nz; ++z) {
        for (std::int32_t y = 0; y < ny; ++y) {
            const std::int64_t row = mask.index(0, y, z);
            for (std::int32_t x = 0; x < nx; ++x) {
                if (!mask.bits[row + x])
                    continue;
                const bool exposed =
                    x == 0 || x == nx - 1 || y == 0 || y == ny - 1 || z == 0 || z == nz - 1 ||
                    !mask.bits[row + x - 1] || !mask.bits[row + x + 1] ||
                    !mask.test(x, y - 1, z) || !mask.test(x, y + 1, z) ||
                    !mask.test(x, y, z - 1) || !mask.test(x, y, z + 1);
                if (exposed)
                    surface.points.push_back({x, y, z});
            }
        }
    }
    if (surface.points.empty())
        throw EmptyMask("boundary of an empty mask");
    return surface;
}

} // namespace segrank::metrics
