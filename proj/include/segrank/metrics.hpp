#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segrank/distance.hpp"
#include "segrank/mask.hpp"
#include "segrank/nifti.hpp"

namespace segrank::metrics {

enum class CellState { Value, NotApplicable, MissingPrediction };

// One metric slot of a per-label record. Absent states carry why the number
// is missing so downstream substitution can treat them differently.
struct MetricCell {
    CellState state = CellState::NotApplicable;
    double value = 0.0;

    static MetricCell of(double v) { return {CellState::Value, v}; }
    static MetricCell not_applicable() { return {CellState::NotApplicable, 0.0}; }
    static MetricCell missing() { return {CellState::MissingPrediction, 0.0}; }
    bool has_value() const { return state == CellState::Value; }
};

std::string cell_text(const MetricCell& cell);
MetricCell parse_cell(const std::string& text);

struct LabelMetrics {
    int label_code = 0;
    std::string label_name;
    MetricCell dsc;
    MetricCell vs;
    MetricCell hd;
    MetricCell hd95;
    bool gt_present = false;
    bool pred_present = false;
    std::uint64_t gt_voxels = 0;
    std::uint64_t pred_voxels = 0;
};

enum class HdUnits { Voxels, Millimetres };
enum class PercentileCombine { MaxOfDirected, Pooled };

struct EvalOptions {
    HdUnits units = HdUnits::Voxels;
    double hd_q = 95.0;
    PercentileCombine combine = PercentileCombine::MaxOfDirected;
};

double dsc(const BinaryMask& ms, const BinaryMask& ns);
double volume_similarity(const BinaryMask& ms, const BinaryMask& ns);

// Ascending-sort nearest-rank percentile: value at 1-based index ceil(q/100 * n).
double nearest_rank_percentile(std::vector<double> values, double q);

double directed_hausdorff(const SurfaceSet& a, const DistanceField& dt_b);
double directed_hausdorff(const SurfaceSet& a, const DistanceFieldMm& dt_b);

double hausdorff(const BinaryMask& ms, const BinaryMask& ns);
double hausdorff(const BinaryMask& ms, const BinaryMask& ns, std::array<double, 3> spacing);
double hausdorff_percentile(const BinaryMask& ms, const BinaryMask& ns, double q,
                            PercentileCombine combine = PercentileCombine::MaxOfDirected);
double hausdorff_percentile(const BinaryMask& ms, const BinaryMask& ns, double q,
                            std::array<double, 3> spacing,
                            PercentileCombine combine = PercentileCombine::MaxOfDirected);

std::vector<LabelMetrics> evaluate_case(const io::LabelVolume& gt, const io::LabelVolume& pred,
                                        const io::LabelScheme& scheme,
                                        const EvalOptions& options = {});

struct IcvResult {
    std::uint64_t voxels = 0;
    double mm3 = 0.0;
};

IcvResult intracranial_volume(const io::LabelVolume& volume, const io::LabelScheme& scheme);
double icv_percent_difference(const io::LabelVolume& gt, const io::LabelVolume& pred,
                              const io::LabelScheme& scheme);

} // namespace segrank::metrics
