#include "segrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "segrank/csv.hpp"

namespace segrank::metrics {

std::string cell_text(const MetricCell& cell) {
    switch (cell.state) {
    case CellState::Value: return csv::fmt_double(cell.value);
    case CellState::NotApplicable: return "NA";
    case CellState::MissingPrediction: return "MISSING";
    }
    throw Error("unreachable cell state");
}

MetricCell parse_cell(const std::string& text) {
    if (text == "NA")
        return MetricCell::not_applicable();
    if (text == "MISSING")
        return MetricCell::missing();
    return MetricCell::of(csv::parse_double(text));
}

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
    if (a.dims != b.dims)
        throw DimMismatch("mask extents differ");
}

std::uint64_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        n += a.bits[i] & b.bits[i];
    return n;
}

} // namespace

double dsc(const BinaryMask& ms, const BinaryMask& ns) {
    require_same_dims(ms, ns);
    const std::uint64_t vm = ms.count();
    const std::uint64_t vn = ns.count();
    if (vm + vn == 0)
        throw BothEmpty("dsc of two empty masks");
    return 2.0 * static_cast<double>(intersection_count(ms, ns)) / static_cast<double>(vm + vn);
}

double volume_similarity(const BinaryMask& ms, const BinaryMask& ns) {
    require_same_dims(ms, ns);
    const std::uint64_t vm = ms.count();
    const std::uint64_t vn = ns.count();
    if (vm + vn == 0)
        throw BothEmpty("volume similarity of two empty masks");
    const double diff = vm > vn ? static_cast<double>(vm - vn) : static_cast<double>(vn - vm);
    return 1.0 - diff / static_cast<double>(vm + vn);
}

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty())
        throw EmptySet("percentile of an empty list");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<std::int64_t>(values.size());
    auto k = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n) / 100.0 - 1e-9));
    k = std::clamp<std::int64_t>(k, 1, n);
    return values[static_cast<std::size_t>(k - 1)];
}

namespace {

template <class Field>
double max_distance(const SurfaceSet& a, const Field& dt_b) {
    if (a.points.empty())
        throw EmptySet("directed distance from an empty point set");
    double best = 0.0;
    for (const auto& p : a.points)
        best = std::max(best, dt_b.value_at(p));
    return best;
}

std::pair<std::array<std::int32_t, 3>, std::array<std::int32_t, 3>>
bounding_box(const SurfaceSet& a, const SurfaceSet& b) {
    std::array<std::int32_t, 3> lo{std::numeric_limits<std::int32_t>::max(),
                                   std::numeric_limits<std::int32_t>::max(),
                                   std::numeric_limits<std::int32_t>::max()};
    std::array<std::int32_t, 3> hi{std::numeric_limits<std::int32_t>::min(),
                                   std::numeric_limits<std::int32_t>::min(),
                                   std::numeric_limits<std::int32_t>::min()};
    auto expand = [&](const SurfaceSet& s) {
        for (const auto& p : s.points)
            for (int i = 0; i < 3; ++i) {
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
    };
    expand(a);
    expand(b);
    for (int i = 0; i < 3; ++i)
        ++hi[i];
    return {lo, hi};
}

struct SurfaceDistances {
    std::vector<double> ms_to_ns;
    std::vector<double> ns_to_ms;
};

template <class Field>
std::vector<double> distances_from(const SurfaceSet& from, const Field& to_field) {
    std::vector<double> out;
    out.reserve(from.points.size());
    for (const auto& p : from.points)
        out.push_back(to_field.value_at(p));
    return out;
}

SurfaceDistances surface_distances(const BinaryMask& ms, const BinaryMask& ns,
                                   const std::array<double, 3>* spacing) {
    require_same_dims(ms, ns);
    if (ms.empty() || ns.empty())
        throw EitherEmpty("surface distance needs two non-empty masks");
    const SurfaceSet sa = boundary(ms);
    const SurfaceSet sb = boundary(ns);
    const auto [lo, hi] = bounding_box(sa, sb);
    SurfaceDistances out;
    if (spacing) {
        const auto to_a = distance_transform_box(sa, lo, hi, *spacing);
        const auto to_b = distance_transform_box(sb, lo, hi, *spacing);
        out.ms_to_ns = distances_from(sa, to_b);
        out.ns_to_ms = distances_from(sb, to_a);
    } else {
        const auto to_a = distance_transform_box(sa, lo, hi);
        const auto to_b = distance_transform_box(sb, lo, hi);
        out.ms_to_ns = distances_from(sa, to_b);
        out.ns_to_ms = distances_from(sb, to_a);
    }
    return out;
}

double combine_percentiles(SurfaceDistances d, double q, PercentileCombine combine) {
    if (combine == PercentileCombine::Pooled) {
        d.ms_to_ns.insert(d.ms_to_ns.end(), d.ns_to_ms.begin(), d.ns_to_ms.end());
        return nearest_rank_percentile(std::move(d.ms_to_ns), q);
    }
    return std::max(nearest_rank_percentile(std::move(d.ms_to_ns), q),
                    nearest_rank_percentile(std::move(d.ns_to_ms), q));
}

} // namespace

double directed_hausdorff(const SurfaceSet& a, const DistanceField& dt_b) {
    return max_distance(a, dt_b);
}

double directed_hausdorff(const SurfaceSet& a, const DistanceFieldMm& dt_b) {
    return max_distance(a, dt_b);
}

double hausdorff(const BinaryMask& ms, const BinaryMask& ns) {
    auto d = surface_distances(ms, ns, nullptr);
    return std::max(*std::max_element(d.ms_to_ns.begin(), d.ms_to_ns.end()),
                    *std::max_element(d.ns_to_ms.begin(), d.ns_to_ms.end()));
}

double hausdorff(const BinaryMask& ms, const BinaryMask& ns, std::array<double, 3> spacing) {
    auto d = surface_distances(ms, ns, &spacing);
    return std::max(*std::max_element(d.ms_to_ns.begin(), d.ms_to_ns.end()),
                    *std::max_element(d.ns_to_ms.begin(), d.ns_to_ms.end()));
}

double hausdorff_percentile(const BinaryMask& ms, const BinaryMask& ns, double q,
                            PercentileCombine combine) {
    return combine_percentiles(surface_distances(ms, ns, nullptr), q, combine);
}

double hausdorff_percentile(const BinaryMask& ms, const BinaryMask& ns, double q,
                            std::array<double, 3> spacing, PercentileCombine combine) {
    return combine_percentiles(surface_distances(ms, ns, &spacing), q, combine);
}

std::vector<LabelMetrics> evaluate_case(const io::LabelVolume& gt, const io::LabelVolume& pred,
                                        const io::LabelScheme& scheme,
                                        const EvalOptions& options) {
    if (gt.dims != pred.dims)
        throw DimMismatch("reference and prediction grids differ");
    if (gt.spacing != pred.spacing)
        throw SpacingMismatch("reference and prediction voxel spacing differ");

    std::array<std::uint64_t, 256> gt_counts{};
    std::array<std::uint64_t, 256> pred_counts{};
    for (std::uint8_t v : gt.voxels)
        ++gt_counts[v];
    for (std::uint8_t v : pred.voxels)
        ++pred_counts[v];

    const std::array<double, 3> spacing = gt.spacing;
    std::vector<LabelMetrics> records;
    for (int code : scheme.foreground_codes()) {
        LabelMetrics m;
        m.label_code = code;
        m.label_name = scheme.find(code)->name;
        m.gt_voxels = gt_counts[static_cast<std::size_t>(code)];
        m.pred_voxels = pred_counts[static_cast<std::size_t>(code)];
        m.gt_present = m.gt_voxels > 0;
        m.pred_present = m.pred_voxels > 0;
        if (!m.gt_present) {
            m.dsc = MetricCell::not_applicable();
            m.vs = MetricCell::not_applicable();
            m.hd = MetricCell::not_applicable();
            m.hd95 = MetricCell::not_applicable();
        } else if (!m.pred_present) {
            m.dsc = MetricCell::of(0.0);
            m.vs = MetricCell::of(0.0);
            m.hd = MetricCell::missing();
            m.hd95 = MetricCell::missing();
        } else {
            const BinaryMask ms = extract_mask(gt, scheme, code);
            const BinaryMask ns = extract_mask(pred, scheme, code);
            m.dsc = MetricCell::of(dsc(ms, ns));
            m.vs = MetricCell::of(volume_similarity(ms, ns));
            auto d = surface_distances(ms, ns,
                                       options.units == HdUnits::Millimetres ? &spacing : nullptr);
            m.hd = MetricCell::of(
                std::max(*std::max_element(d.ms_to_ns.begin(), d.ms_to_ns.end()),
                         *std::max_element(d.ns_to_ms.begin(), d.ns_to_ms.end())));
            m.hd95 = MetricCell::of(combine_percentiles(std::move(d), options.hd_q,
                                                        options.combine));
        }
        records.push_back(std::move(m));
    }
    return records;
}

IcvResult intracranial_volume(const io::LabelVolume& volume, const io::LabelScheme& scheme) {
    IcvResult result;
    const auto background = static_cast<std::uint8_t>(scheme.background_code);
    for (std::uint8_t v : volume.voxels)
        result.voxels += v != background;
    result.mm3 = static_cast<double>(result.voxels) * volume.spacing[0] * volume.spacing[1] *
                 volume.spacing[2];
    return result;
}

double icv_percent_difference(const io::LabelVolume& gt, const io::LabelVolume& pred,
                              const io::LabelScheme& scheme) {
    const IcvResult ref = intracranial_volume(gt, scheme);
    if (ref.voxels == 0)
        throw EmptyReference("reference volume has no foreground voxels");
    const IcvResult sub = intracranial_volume(pred, scheme);
    return 100.0 * (sub.mm3 - ref.mm3) / ref.mm3;
}

} // namespace segrank::metrics
