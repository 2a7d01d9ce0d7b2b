#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "segrank/errors.hpp"

namespace segrank::rank {

enum class Metric { DSC, HD95, VS };
enum class Direction { HigherBetter, LowerBetter };

Direction direction_of(Metric metric);
std::string metric_name(Metric metric);

/// One (team, case, label) observation for a single metric. A nullopt value
/// is the missing-prediction marker awaiting worst-value substitution.
struct Record {
    std::string team;
    std::string case_id;
    int label_code = 0;
    std::optional<double> value;
};
using Records = std::vector<Record>;

/// The three ranked metrics over the same cases, one collection each.
struct MetricRecords {
    Records dsc;
    Records hd95;
    Records vs;
};

enum class RankOrder { AggregateThenRank, RankThenAggregate };
enum class Aggregator { Mean, Median };

struct RankScheme {
    RankOrder order = RankOrder::AggregateThenRank;
    Aggregator aggregator = Aggregator::Mean;
};

std::string scheme_name(const RankScheme& scheme);

struct TeamValue {
    std::string team;
    double value = 0.0;
};
using TeamValues = std::vector<TeamValue>;

struct RankRow {
    std::string team;
    double aggregate = 0.0;
    int rank = 0;
};

struct RankingTable {
    std::vector<RankRow> rows;
    std::string metric;
    std::string subset = "all";

    int rank_of(const std::string& team) const;
    double aggregate_of(const std::string& team) const;
};

/// Worst-value policy: missing DSC/VS become 0; a missing HD95 becomes twice
/// the largest value submitted by the other teams.
Records substitute_missing(Records records, Metric metric);

/// Per-team aggregate, sorted by team name. AggregateThenRank pools every
/// (case, label) value; RankThenAggregate ranks teams within each (case,
/// label) first and aggregates the ranks.
TeamValues aggregate_metric(const Records& records, Metric metric, RankScheme scheme = {});

/// Competition ("min") ranks: tied teams share the smallest applicable rank
/// and the next rank is skipped. Values compare equal when they differ from
/// the tie group's best value by at most tie_epsilon.
RankingTable rank_values(const TeamValues& values, Direction direction, double tie_epsilon = 0.0);

/// Rank of the mean of the three per-metric ranks, lower mean first.
RankingTable combined_ranking(const std::array<RankingTable, 3>& per_metric,
                              double tie_epsilon = 0.0);

/// One metric end to end: substitute missing, aggregate, rank.
RankingTable metric_ranking(const Records& records, Metric metric, RankScheme scheme = {},
                            double tie_epsilon = 0.0);

struct ChallengeResult {
    RankingTable dsc;
    RankingTable hd95;
    RankingTable vs;
    RankingTable combined;
};

/// Full pipeline: substitute per metric, aggregate, rank, combine.
ChallengeResult challenge_ranking(const MetricRecords& records, RankScheme scheme = {},
                                  double tie_epsilon = 0.0);

RankingTable per_label_ranking(const MetricRecords& records, int label_code,
                               RankScheme scheme = {}, double tie_epsilon = 0.0);

RankingTable subset_ranking(const MetricRecords& records, const std::vector<std::string>& case_ids,
                            RankScheme scheme = {}, double tie_epsilon = 0.0);

/// Combined tables for all four scheme variants, for stability line plots.
std::vector<std::pair<RankScheme, RankingTable>> ranking_method_sweep(
    const MetricRecords& records, double tie_epsilon = 0.0);

} // namespace segrank::rank
