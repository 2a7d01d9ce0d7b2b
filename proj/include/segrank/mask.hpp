#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/nifti.hpp"

namespace segrank::metrics {

/// Dense occupancy grid for one label, x-fastest like LabelVolume.
struct BinaryMask {
    std::array<std::int32_t, 3> dims{};
    std::vector<std::uint8_t> bits;

    std::int64_t index(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) * (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    bool test(int x, int y, int z) const { return bits[index(x, y, z)] != 0; }
    std::uint64_t count() const;
    bool empty() const { return count() == 0; }
};

/// Voxel coordinates on a mask boundary (6-neighbourhood rule: a set voxel
/// with at least one face neighbour unset or outside the grid).
struct SurfaceSet {
    std::vector<std::array<std::int32_t, 3>> points;
};

BinaryMask extract_mask(const io::LabelVolume& volume, const io::LabelScheme& scheme, int code);

SurfaceSet boundary(const BinaryMask& mask);

} // namespace segrank::metrics
