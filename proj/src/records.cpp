#include "segrank/records.hpp"

namespace segrank::rank {

std::vector<CaseRow> rows_for_case(const std::string& team, const std::string& case_id,
                                   const std::vector<metrics::LabelMetrics>& label_metrics) {
    std::vector<CaseRow> rows;
    rows.reserve(label_metrics.size());
    for (const auto& m : label_metrics) {
        CaseRow row;
        row.team = team;
        row.case_id = case_id;
        row.label_code = m.label_code;
        row.label_name = m.label_name;
        row.dsc = m.dsc;
        row.vs = m.vs;
        row.hd = m.hd;
        row.hd95 = m.hd95;
        row.gt_present = m.gt_present;
        row.pred_present = m.pred_present;
        row.gt_voxels = m.gt_voxels;
        row.pred_voxels = m.pred_voxels;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CaseRow> missing_case_rows(const std::string& team, const std::string& case_id,
                                       const io::LabelScheme& scheme) {
    std::vector<CaseRow> rows;
    for (int code : scheme.foreground_codes()) {
        CaseRow row;
        row.team = team;
        row.case_id = case_id;
        row.label_code = code;
        row.label_name = scheme.find(code)->name;
        row.dsc = metrics::MetricCell::missing();
        row.vs = metrics::MetricCell::missing();
        row.hd = metrics::MetricCell::missing();
        row.hd95 = metrics::MetricCell::missing();
        rows.push_back(std::move(row));
    }
    return rows;
}

csv::Table rows_to_table(const std::vector<CaseRow>& rows) {
    csv::Table table;
    table.header = {"team", "case",        "label_code",   "label_name", "dsc",
                    "vs",   "hd",          "hd95",         "gt_present", "pred_present",
                    "gt_voxels", "pred_voxels"};
    for (const auto& r : rows) {
        table.rows.push_back({r.team, r.case_id, std::to_string(r.label_code), r.label_name,
                              metrics::cell_text(r.dsc), metrics::cell_text(r.vs),
                              metrics::cell_text(r.hd), metrics::cell_text(r.hd95),
                              r.gt_present ? "1" : "0", r.pred_present ? "1" : "0",
                              std::to_string(r.gt_voxels), std::to_string(r.pred_voxels)});
    }
    return table;
}

std::vector<CaseRow> rows_from_table(const csv::Table& table) {
    const int team = table.column("team");
    const int case_id = table.column("case");
    const int label_code = table.column("label_code");
    const int label_name = table.column("label_name");
    const int dsc = table.column("dsc");
    const int vs = table.column("vs");
    const int hd = table.column("hd");
    const int hd95 = table.column("hd95");
    const int gt_present = table.column("gt_present");
    const int pred_present = table.column("pred_present");
    const int gt_voxels = table.column("gt_voxels");
    const int pred_voxels = table.column("pred_voxels");

    auto field = [](const std::vector<std::string>& row, int i) -> const std::string& {
        return row[static_cast<std::size_t>(i)];
    };
    std::vector<CaseRow> rows;
    rows.reserve(table.rows.size());
    for (const auto& raw : table.rows) {
        CaseRow row;
        row.team = field(raw, team);
        row.case_id = field(raw, case_id);
        row.label_code = static_cast<int>(csv::parse_long(field(raw, label_code)));
        row.label_name = field(raw, label_name);
        row.dsc = metrics::parse_cell(field(raw, dsc));
        row.vs = metrics::parse_cell(field(raw, vs));
        row.hd = metrics::parse_cell(field(raw, hd));
        row.hd95 = metrics::parse_cell(field(raw, hd95));
        row.gt_present = field(raw, gt_present) == "1";
        row.pred_present = field(raw, pred_present) == "1";
        row.gt_voxels = static_cast<std::uint64_t>(csv::parse_long(field(raw, gt_voxels)));
        row.pred_voxels = static_cast<std::uint64_t>(csv::parse_long(field(raw, pred_voxels)));
        rows.push_back(std::move(row));
    }
    return rows;
}

MetricRecords split_records(const std::vector<CaseRow>& rows) {
    MetricRecords out;
    auto add = [](Records& records, const CaseRow& row, const metrics::MetricCell& cell) {
        if (cell.state == metrics::CellState::NotApplicable)
            return;
        Record r;
        r.team = row.team;
        r.case_id = row.case_id;
        r.label_code = row.label_code;
        if (cell.state == metrics::CellState::Value)
            r.value = cell.value;
        records.push_back(std::move(r));
    };
    for (const auto& row : rows) {
        add(out.dsc, row, row.dsc);
        add(out.hd95, row, row.hd95);
        add(out.vs, row, row.vs);
    }
    return out;
}

} // namespace segrank::rank
