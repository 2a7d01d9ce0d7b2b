#include "segrank/distance.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace segrank::metrics {

namespace {

template <class T>
constexpr T infinite_value() {
    if constexpr (std::is_floating_point_v<T>)
        return std::numeric_limits<T>::infinity();
    else
        return std::numeric_limits<T>::max() / 4;
}

// One lower-envelope pass along a line. f holds squared distances so far,
// w2 is the squared step length along this axis. Seeds with f >= inf are
// skipped so the envelope only contains reachable parabolas.
template <class T>
void envelope_line(const T* f, T* d, std::int32_t n, double w2, std::vector<std::int32_t>& v,
                   std::vector<double>& z) {
    const T inf = infinite_value<T>();
    v.clear();
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (std::int32_t q = 0; q < n; ++q) {
        if (f[q] >= inf)
            continue;
        const double fq = static_cast<double>(f[q]);
        double s = 0.0;
        while (k >= 0) {
            const std::int32_t p = v[static_cast<std::size_t>(k)];
            s = (fq - static_cast<double>(f[p])) / w2 + static_cast<double>(q) * q -
                static_cast<double>(p) * p;
            s /= 2.0 * (q - p);
            if (s > z[static_cast<std::size_t>(k)])
                break;
            --k;
        }
        if (k < 0) {
            k = 0;
            v.resize(1);
            v[0] = q;
            z[0] = -std::numeric_limits<double>::infinity();
            z[1] = std::numeric_limits<double>::infinity();
        } else {
            ++k;
            v.resize(static_cast<std::size_t>(k) + 1);
            v[static_cast<std::size_t>(k)] = q;
            z[static_cast<std::size_t>(k)] = s;
            z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
        }
    }
    if (k < 0) {
        for (std::int32_t x = 0; x < n; ++x)
            d[x] = inf;
        return;
    }
    std::size_t j = 0;
    for (std::int32_t x = 0; x < n; ++x) {
        while (z[j + 1] < static_cast<double>(x))
            ++j;
        const std::int32_t p = v[j];
        const std::int64_t dx = x - p;
        if constexpr (std::is_floating_point_v<T>)
            d[x] = f[p] + static_cast<T>(w2 * static_cast<double>(dx * dx));
        else
            d[x] = f[p] + static_cast<T>(dx * dx);
    }
}

template <class T>
void transform_axis(std::vector<T>& grid, const std::array<std::int32_t, 3>& dims, int axis,
                    double w2) {
    const auto [nx, ny, nz] = dims;
    const std::int64_t sx = 1;
    const std::int64_t sy = nx;
    const std::int64_t sz = static_cast<std::int64_t>(nx) * ny;
    std::int32_t n;
    std::int64_t stride;
    std::int64_t ou, ov;
    std::int32_t nu, nv;
    if (axis == 0) {
        n = nx;
        stride = sx;
        ou = sy;
        nu = ny;
        ov = sz;
        nv = nz;
    } else if (axis == 1) {
        n = ny;
        stride = sy;
        ou = sx;
        nu = nx;
        ov = sz;
        nv = nz;
    } else {
        n = nz;
        stride = sz;
        ou = sx;
        nu = nx;
        ov = sy;
        nv = ny;
    }
    std::vector<T> line(static_cast<std::size_t>(n));
    std::vector<T> out(static_cast<std::size_t>(n));
    std::vector<std::int32_t> v;
    std::vector<double> z;
    for (std::int32_t b = 0; b < nv; ++b) {
        for (std::int32_t a = 0; a < nu; ++a) {
            const std::int64_t base = a * ou + b * ov;
            T* g = grid.data() + base;
            if (stride == 1) {
                envelope_line(g, out.data(), n, w2, v, z);
                std::copy(out.begin(), out.end(), g);
            } else {
                for (std::int32_t i = 0; i < n; ++i)
                    line[static_cast<std::size_t>(i)] = g[i * stride];
                envelope_line(line.data(), out.data(), n, w2, v, z);
                for (std::int32_t i = 0; i < n; ++i)
                    g[i * stride] = out[static_cast<std::size_t>(i)];
            }
        }
    }
}

template <class T>
DistanceFieldT<T> transform_impl(const SurfaceSet& surface, std::array<std::int32_t, 3> origin,
                                 std::array<std::int32_t, 3> dims,
                                 std::array<double, 3> step) {
    if (surface.points.empty())
        throw EmptySurface("distance transform needs at least one surface point");
    DistanceFieldT<T> field;
    field.dims = dims;
    field.origin = origin;
    const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    field.sq.assign(total, infinite_value<T>());
    for (const auto& p : surface.points) {
        const std::int64_t i = field.index_local(p[0] - origin[0], p[1] - origin[1],
                                                 p[2] - origin[2]);
        field.sq[static_cast<std::size_t>(i)] = T(0);
    }
    for (int axis = 0; axis < 3; ++axis)
        transform_axis(field.sq, dims, axis, step[axis] * step[axis]);
    return field;
}

std::array<std::int32_t, 3> box_extent(const std::array<std::int32_t, 3>& lo,
                                       const std::array<std::int32_t, 3>& hi) {
    return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
}

} // namespace

DistanceField distance_transform(const SurfaceSet& surface, std::array<std::int32_t, 3> dims) {
    return transform_impl<std::int64_t>(surface, {0, 0, 0}, dims, {1.0, 1.0, 1.0});
}

DistanceFieldMm distance_transform(const SurfaceSet& surface, std::array<std::int32_t, 3> dims,
                                   std::array<double, 3> spacing) {
    return transform_impl<double>(surface, {0, 0, 0}, dims, spacing);
}

DistanceField distance_transform_box(const SurfaceSet& surface, std::array<std::int32_t, 3> lo,
                                     std::array<std::int32_t, 3> hi) {
    return transform_impl<std::int64_t>(surface, lo, box_extent(lo, hi), {1.0, 1.0, 1.0});
}

DistanceFieldMm distance_transform_box(const SurfaceSet& surface, std::array<std::int32_t, 3> lo,
                                       std::array<std::int32_t, 3> hi,
                                       std::array<double, 3> spacing) {
    return transform_impl<double>(surface, lo, box_extent(lo, hi), spacing);
}

} // namespace segrank::metrics
