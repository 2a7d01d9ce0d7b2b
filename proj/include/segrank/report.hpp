#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segrank/cohort.hpp"
#include "segrank/metrics.hpp"
#include "segrank/ranking.hpp"
#include "segrank/records.hpp"
#include "segrank/stats.hpp"

namespace segrank::report {

struct RunConfig {
    std::filesystem::path gt_dir;
    std::filesystem::path pred_root;
    std::filesystem::path manifest_path;
    std::filesystem::path output_dir;
    io::LabelScheme scheme = io::LabelScheme::fetal_tissue_default();
    /// Metrics to emit tables for. Combined-rank outputs need all three.
    std::vector<rank::Metric> metrics{rank::Metric::DSC, rank::Metric::HD95,
                                      rank::Metric::VS};
    double hd_percentile = 95.0;
    metrics::HdUnits units = metrics::HdUnits::Voxels;
    rank::RankScheme rank_scheme{};
    double tie_epsilon = 0.0;
    double alpha = 0.05;
    int bootstrap_b = 1000;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool emit_svg = false;
    /// Restrict every analysis to one manifest subset when set.
    std::optional<std::string> subset;

    void validate() const;
};

/// Named case filters over a manifest, the subset axes of the per-cohort
/// ranking tables.
std::vector<std::pair<std::string, cohort::CasePredicate>> subset_axes();
cohort::CasePredicate subset_predicate(const std::string& name);

struct IcvRow {
    std::string team;
    std::string case_id;
    double gt_mm3 = 0.0;
    metrics::MetricCell pred_mm3;
    metrics::MetricCell percent_diff;
};

struct Evaluation {
    std::vector<rank::CaseRow> rows;
    std::vector<IcvRow> icv;
    std::vector<std::string> teams;
    std::vector<std::string> cases;
    std::vector<std::string> warnings;
};

/// Evaluates every (team, case) pair found under the configured roots.
/// A missing prediction file yields all-missing rows plus a warning; a
/// prediction on a different grid aborts the run.
Evaluation evaluate_all(const RunConfig& config);

/// Per-case ratings parsed from any CSV with case_id and quality_r1..r3
/// columns (a cohort manifest qualifies).
std::vector<std::pair<std::string, std::vector<cohort::Quality>>> read_ratings(
    const std::filesystem::path& path);

struct CommandResult {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

CommandResult cmd_evaluate(const RunConfig& config);
CommandResult cmd_rank(const RunConfig& config);
CommandResult cmd_stats(const RunConfig& config);
CommandResult cmd_agreement(const RunConfig& config);
CommandResult cmd_icv(const RunConfig& config);
CommandResult cmd_report(const RunConfig& config);
CommandResult run_all(const RunConfig& config);

std::string sha256_hex(const std::filesystem::path& path);

/// CLI value parsers.
rank::RankScheme parse_rank_scheme(const std::string& name);
metrics::HdUnits parse_units(const std::string& name);
/// Label scheme override from a CSV with columns code,name; background is
/// the scheme's smallest code.
io::LabelScheme load_label_scheme(const std::filesystem::path& path);

} // namespace segrank::report
