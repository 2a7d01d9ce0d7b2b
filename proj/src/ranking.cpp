#include "segrank/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace segrank::rank {

Direction direction_of(Metric metric) {
    return metric == Metric::HD95 ? Direction::LowerBetter : Direction::HigherBetter;
}

std::string metric_name(Metric metric) {
    switch (metric) {
    case Metric::DSC: return "DSC";
    case Metric::HD95: return "HD95";
    case Metric::VS: return "VS";
    }
    throw Error("unreachable metric");
}

std::string scheme_name(const RankScheme& scheme) {
    std::string name =
        scheme.order == RankOrder::AggregateThenRank ? "aggregate_then_rank" : "rank_then_aggregate";
    name += scheme.aggregator == Aggregator::Mean ? "_mean" : "_median";
    return name;
}

int RankingTable::rank_of(const std::string& team) const {
    for (const auto& row : rows)
        if (row.team == team)
            return row.rank;
    throw TeamSetMismatch("team not in table: " + team);
}

double RankingTable::aggregate_of(const std::string& team) const {
    for (const auto& row : rows)
        if (row.team == team)
            return row.aggregate;
    throw TeamSetMismatch("team not in table: " + team);
}

Records substitute_missing(Records records, Metric metric) {
    if (metric != Metric::HD95) {
        for (auto& r : records)
            if (!r.value)
                r.value = 0.0;
        return records;
    }
    // Worst present value, and the worst among teams other than the team
    // holding it, so each missing record can exclude its own team.
    std::string top_team;
    double top = -1.0;
    for (const auto& r : records)
        if (r.value && *r.value > top) {
            top = *r.value;
            top_team = r.team;
        }
    double top_other = -1.0;
    for (const auto& r : records)
        if (r.value && r.team != top_team)
            top_other = std::max(top_other, *r.value);
    for (auto& r : records) {
        if (r.value)
            continue;
        const double basis = r.team == top_team ? top_other : top;
        if (basis < 0.0)
            throw AllMissing("no other team has a present value to double for " + r.team);
        r.value = 2.0 * basis;
    }
    return records;
}

namespace {

double aggregate_values(std::vector<double>& values, Aggregator aggregator) {
    if (aggregator == Aggregator::Mean) {
        double sum = 0.0;
        for (double v : values)
            sum += v;
        return sum / static_cast<double>(values.size());
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2)
        return values[n / 2];
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

TeamValues group_aggregate(const std::map<std::string, std::vector<double>>& per_team,
                           Aggregator aggregator) {
    TeamValues out;
    out.reserve(per_team.size());
    for (auto& [team, values] : per_team) {
        auto copy = values;
        out.push_back({team, aggregate_values(copy, aggregator)});
    }
    return out;
}

std::vector<std::pair<std::string, int>> competition_ranks(TeamValues values, Direction direction,
                                                           double tie_epsilon) {
    std::sort(values.begin(), values.end(), [&](const TeamValue& a, const TeamValue& b) {
        if (a.value != b.value)
            return direction == Direction::HigherBetter ? a.value > b.value : a.value < b.value;
        return a.team < b.team;
    });
    std::vector<std::pair<std::string, int>> ranks;
    ranks.reserve(values.size());
    double group_best = 0.0;
    int group_rank = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i == 0 || std::abs(values[i].value - group_best) > tie_epsilon) {
            group_best = values[i].value;
            group_rank = static_cast<int>(i) + 1;
        }
        ranks.emplace_back(values[i].team, group_rank);
    }
    return ranks;
}

} // namespace

TeamValues aggregate_metric(const Records& records, Metric metric, RankScheme scheme) {
    if (records.empty())
        throw EmptyRecords("no records to aggregate");
    if (scheme.order == RankOrder::AggregateThenRank) {
        std::map<std::string, std::vector<double>> per_team;
        for (const auto& r : records) {
            if (!r.value)
                throw EmptyRecords("missing value reached aggregation; substitute first");
            per_team[r.team].push_back(*r.value);
        }
        return group_aggregate(per_team, scheme.aggregator);
    }
    // Rank teams within each (case, label) cell, then aggregate the ranks.
    std::map<std::pair<std::string, int>, TeamValues> cells;
    for (const auto& r : records) {
        if (!r.value)
            throw EmptyRecords("missing value reached aggregation; substitute first");
        cells[{r.case_id, r.label_code}].push_back({r.team, *r.value});
    }
    std::map<std::string, std::vector<double>> per_team;
    for (const auto& [key, cell] : cells)
        for (const auto& [team, rank] : competition_ranks(cell, direction_of(metric), 0.0))
            per_team[team].push_back(static_cast<double>(rank));
    return group_aggregate(per_team, scheme.aggregator);
}

RankingTable rank_values(const TeamValues& values, Direction direction, double tie_epsilon) {
    RankingTable table;
    std::map<std::string, double> aggregates;
    for (const auto& v : values)
        aggregates[v.team] = v.value;
    for (const auto& [team, rank] : competition_ranks(values, direction, tie_epsilon))
        table.rows.push_back({team, aggregates.at(team), rank});
    std::sort(table.rows.begin(), table.rows.end(), [](const RankRow& a, const RankRow& b) {
        if (a.rank != b.rank)
            return a.rank < b.rank;
        return a.team < b.team;
    });
    return table;
}

RankingTable combined_ranking(const std::array<RankingTable, 3>& per_metric, double tie_epsilon) {
    std::set<std::string> reference;
    for (const auto& row : per_metric[0].rows)
        reference.insert(row.team);
    for (const auto& table : per_metric) {
        std::set<std::string> teams;
        for (const auto& row : table.rows)
            teams.insert(row.team);
        if (teams != reference)
            throw TeamSetMismatch("per-metric tables rank different team sets");
    }
    TeamValues means;
    for (const auto& team : reference) {
        double sum = 0.0;
        for (const auto& table : per_metric)
            sum += static_cast<double>(table.rank_of(team));
        means.push_back({team, sum / 3.0});
    }
    auto table = rank_values(means, Direction::LowerBetter, tie_epsilon);
    table.metric = "combined";
    return table;
}

RankingTable metric_ranking(const Records& records, Metric metric, RankScheme scheme,
                            double tie_epsilon) {
    auto table = rank_values(
        aggregate_metric(substitute_missing(records, metric), metric, scheme),
        scheme.order == RankOrder::AggregateThenRank ? direction_of(metric)
                                                     : Direction::LowerBetter,
        tie_epsilon);
    table.metric = metric_name(metric);
    return table;
}

ChallengeResult challenge_ranking(const MetricRecords& records, RankScheme scheme,
                                  double tie_epsilon) {
    ChallengeResult result;
    result.dsc = metric_ranking(records.dsc, Metric::DSC, scheme, tie_epsilon);
    result.hd95 = metric_ranking(records.hd95, Metric::HD95, scheme, tie_epsilon);
    result.vs = metric_ranking(records.vs, Metric::VS, scheme, tie_epsilon);
    result.combined = combined_ranking({result.dsc, result.hd95, result.vs}, tie_epsilon);
    return result;
}

namespace {

MetricRecords filter_records(const MetricRecords& records, auto&& keep) {
    MetricRecords out;
    for (const auto& r : records.dsc)
        if (keep(r))
            out.dsc.push_back(r);
    for (const auto& r : records.hd95)
        if (keep(r))
            out.hd95.push_back(r);
    for (const auto& r : records.vs)
        if (keep(r))
            out.vs.push_back(r);
    return out;
}

} // namespace

RankingTable per_label_ranking(const MetricRecords& records, int label_code, RankScheme scheme,
                               double tie_epsilon) {
    auto filtered =
        filter_records(records, [&](const Record& r) { return r.label_code == label_code; });
    if (filtered.dsc.empty() && filtered.hd95.empty() && filtered.vs.empty())
        throw UnknownLabel("no records for label " + std::to_string(label_code));
    auto table = challenge_ranking(filtered, scheme, tie_epsilon).combined;
    table.subset = "label_" + std::to_string(label_code);
    return table;
}

RankingTable subset_ranking(const MetricRecords& records, const std::vector<std::string>& case_ids,
                            RankScheme scheme, double tie_epsilon) {
    const std::set<std::string> wanted(case_ids.begin(), case_ids.end());
    auto filtered =
        filter_records(records, [&](const Record& r) { return wanted.count(r.case_id) > 0; });
    if (filtered.dsc.empty() && filtered.hd95.empty() && filtered.vs.empty())
        throw EmptySubset("case filter selected no records");
    return challenge_ranking(filtered, scheme, tie_epsilon).combined;
}

std::vector<std::pair<RankScheme, RankingTable>> ranking_method_sweep(const MetricRecords& records,
                                                                      double tie_epsilon) {
    std::vector<std::pair<RankScheme, RankingTable>> out;
    for (RankOrder order : {RankOrder::AggregateThenRank, RankOrder::RankThenAggregate})
        for (Aggregator aggregator : {Aggregator::Mean, Aggregator::Median}) {
            const RankScheme scheme{order, aggregator};
            auto table = challenge_ranking(records, scheme, tie_epsilon).combined;
            table.subset = scheme_name(scheme);
            out.emplace_back(scheme, table);
        }
    return out;
}

} // namespace segrank::rank
