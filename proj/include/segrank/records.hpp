#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segrank/csv.hpp"
#include "segrank/metrics.hpp"
#include "segrank/ranking.hpp"

namespace segrank::rank {

/// One row of the per-case metrics CSV: every metric for one
/// (team, case, label) triple, plus presence bookkeeping.
struct CaseRow {
    std::string team;
    std::string case_id;
    int label_code = 0;
    std::string label_name;
    metrics::MetricCell dsc;
    metrics::MetricCell vs;
    metrics::MetricCell hd;
    metrics::MetricCell hd95;
    bool gt_present = false;
    bool pred_present = false;
    std::uint64_t gt_voxels = 0;
    std::uint64_t pred_voxels = 0;
};

std::vector<CaseRow> rows_for_case(const std::string& team, const std::string& case_id,
                                   const std::vector<metrics::LabelMetrics>& label_metrics);

/// All-MISSING rows for a case whose prediction file is absent.
std::vector<CaseRow> missing_case_rows(const std::string& team, const std::string& case_id,
                                       const io::LabelScheme& scheme);

csv::Table rows_to_table(const std::vector<CaseRow>& rows);
std::vector<CaseRow> rows_from_table(const csv::Table& table);

/// Split wide rows into per-metric ranking records. NotApplicable cells
/// contribute nothing; MissingPrediction cells become missing markers.
MetricRecords split_records(const std::vector<CaseRow>& rows);

} // namespace segrank::rank
