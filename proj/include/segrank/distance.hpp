#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/mask.hpp"

namespace segrank::metrics {

/// Per-voxel squared distance to the nearest surface point. T is int64 in
/// voxel units (exact integers up to the final square root) or double when
/// anisotropic spacing is applied. The field may cover a sub-box of the
/// volume; `origin` is its offset in the full grid.
template <class T>
struct DistanceFieldT {
    std::array<std::int32_t, 3> dims{};
    std::array<std::int32_t, 3> origin{};
    std::vector<T> sq;

    std::int64_t index_local(int x, int y, int z) const {
        return x + static_cast<std::int64_t>(dims[0]) * (y + static_cast<std::int64_t>(dims[1]) * z);
    }
    T sq_at(const std::array<std::int32_t, 3>& p) const {
        return sq[index_local(p[0] - origin[0], p[1] - origin[1], p[2] - origin[2])];
    }
    double value_at(const std::array<std::int32_t, 3>& p) const {
        return std::sqrt(static_cast<double>(sq_at(p)));
    }
};

using DistanceField = DistanceFieldT<std::int64_t>;
using DistanceFieldMm = DistanceFieldT<double>;

/// Exact Euclidean distance transform (separable lower-envelope passes)
/// over the full grid, squared voxel units.
DistanceField distance_transform(const SurfaceSet& surface, std::array<std::int32_t, 3> dims);

/// Same, honouring anisotropic voxel spacing; squared millimetres.
DistanceFieldMm distance_transform(const SurfaceSet& surface, std::array<std::int32_t, 3> dims,
                                   std::array<double, 3> spacing);

/// Restricted variants over the half-open box [lo, hi). All surface points
/// must lie inside the box; distances are then exact everywhere in it.
DistanceField distance_transform_box(const SurfaceSet& surface, std::array<std::int32_t, 3> lo,
                                     std::array<std::int32_t, 3> hi);
DistanceFieldMm distance_transform_box(const SurfaceSet& surface, std::array<std::int32_t, 3> lo,
                                       std::array<std::int32_t, 3> hi, std::array<double, 3> spacing);

} // namespace segrank::metrics
