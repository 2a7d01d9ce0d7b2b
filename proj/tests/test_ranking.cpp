#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "leaderboard_fixture.hpp"
#include "segrank/ranking.hpp"
#include "segrank/records.hpp"

using namespace segrank;
using rank::Aggregator;
using rank::Direction;
using rank::Metric;
using rank::MetricRecords;
using rank::RankOrder;
using rank::RankScheme;
using rank::Record;
using rank::Records;
using rank::TeamValue;
using rank::TeamValues;

namespace {

TeamValues leaderboard_column(double golden::Entry::*field) {
    TeamValues values;
    for (const auto& e : golden::kLeaderboard)
        values.push_back({e.team, e.*field});
    return values;
}

Records flat_records(const std::vector<std::pair<std::string, std::vector<double>>>& by_team,
                     int label_code = 1) {
    Records records;
    for (const auto& [team, values] : by_team) {
        int case_no = 0;
        for (double v : values)
            records.push_back({team, "case_" + std::to_string(case_no++), label_code, v});
    }
    return records;
}

// Per-team constant records across shared cases and labels.
MetricRecords constant_records(const std::vector<std::string>& teams,
                               const std::vector<double>& dsc, const std::vector<double>& hd95,
                               const std::vector<double>& vs, int cases = 2, int labels = 2) {
    MetricRecords out;
    for (std::size_t t = 0; t < teams.size(); ++t)
        for (int c = 0; c < cases; ++c)
            for (int l = 1; l <= labels; ++l) {
                const std::string case_id = "case_" + std::to_string(c);
                out.dsc.push_back({teams[t], case_id, l, dsc[t]});
                out.hd95.push_back({teams[t], case_id, l, hd95[t]});
                out.vs.push_back({teams[t], case_id, l, vs[t]});
            }
    return out;
}

} // namespace

TEST_CASE("missing-value substitution applies the worst-value policy") {
    SUBCASE("missing HD95 doubles the best of the other teams") {
        Records records{{"A", "c1", 1, 20.0}, {"A", "c2", 1, 12.0}, {"B", "c1", 1, std::nullopt}};
        auto out = rank::substitute_missing(records, Metric::HD95);
        CHECK(out[2].value == 40.0);
        CHECK(out[0].value == 20.0);
    }
    SUBCASE("the team holding the maximum excludes itself") {
        Records records{{"A", "c1", 1, 20.0},
                        {"A", "c2", 1, std::nullopt},
                        {"B", "c1", 1, 15.0},
                        {"B", "c2", 1, std::nullopt}};
        auto out = rank::substitute_missing(records, Metric::HD95);
        CHECK(out[1].value == 30.0);
        CHECK(out[3].value == 40.0);
    }
    SUBCASE("missing DSC and VS become zero") {
        Records records{{"A", "c1", 1, 0.9}, {"B", "c1", 1, std::nullopt}};
        CHECK(rank::substitute_missing(records, Metric::DSC)[1].value == 0.0);
        CHECK(rank::substitute_missing(records, Metric::VS)[1].value == 0.0);
    }
    SUBCASE("no missing markers leaves records unchanged") {
        Records records{{"A", "c1", 1, 20.0}, {"B", "c1", 1, 15.0}};
        auto out = rank::substitute_missing(records, Metric::HD95);
        REQUIRE(out.size() == 2);
        CHECK(out[0].value == 20.0);
        CHECK(out[1].value == 15.0);
    }
    SUBCASE("substitution never beats any present value") {
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> value(0.1, 30.0);
        for (int trial = 0; trial < 50; ++trial) {
            Records records;
            double best_present = 0.0;
            for (int t = 0; t < 5; ++t)
                for (int c = 0; c < 4; ++c) {
                    Record r{"team_" + std::to_string(t), "case_" + std::to_string(c), 1,
                             std::nullopt};
                    if ((t + c + trial) % 3 != 0) {
                        r.value = value(rng);
                        best_present = std::max(best_present, *r.value);
                    }
                    records.push_back(r);
                }
            if (std::none_of(records.begin(), records.end(),
                             [](const Record& r) { return r.value.has_value(); }))
                continue;
            auto out = rank::substitute_missing(records, Metric::HD95);
            for (std::size_t i = 0; i < records.size(); ++i)
                if (!records[i].value)
                    CHECK(*out[i].value >= best_present);
        }
    }
    SUBCASE("no other team to double raises an error") {
        Records records{{"A", "c1", 1, std::nullopt}, {"A", "c2", 1, 9.0}};
        CHECK_THROWS_AS(rank::substitute_missing(records, Metric::HD95), AllMissing);
        Records none{{"A", "c1", 1, std::nullopt}};
        CHECK_THROWS_AS(rank::substitute_missing(none, Metric::HD95), AllMissing);
    }
}

TEST_CASE("aggregation pools every case and label value") {
    SUBCASE("mean of one team") {
        auto values = rank::aggregate_metric(flat_records({{"A", {0.8, 0.6}}}), Metric::DSC);
        REQUIRE(values.size() == 1);
        CHECK(values[0].value == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("median aggregator resists the outlier") {
        RankScheme scheme{RankOrder::AggregateThenRank, Aggregator::Median};
        auto values =
            rank::aggregate_metric(flat_records({{"A", {1.0, 2.0, 100.0}}}), Metric::DSC, scheme);
        CHECK(values[0].value == 2.0);
    }
    SUBCASE("teams come back sorted by name") {
        auto values = rank::aggregate_metric(
            flat_records({{"zeta", {0.5}}, {"alpha", {0.25}}}), Metric::DSC);
        REQUIRE(values.size() == 2);
        CHECK(values[0].team == "alpha");
        CHECK(values[1].team == "zeta");
    }
    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS(rank::aggregate_metric({}, Metric::DSC), EmptyRecords);
    }
    SUBCASE("a constant mean matches the published example value") {
        std::vector<double> values(280, 0.7858525);
        Records records;
        for (std::size_t i = 0; i < values.size(); ++i)
            records.push_back({"NVAUTO", "case_" + std::to_string(i / 7),
                               static_cast<int>(1 + i % 7), values[i]});
        auto out = rank::aggregate_metric(records, Metric::DSC);
        CHECK(out[0].value == doctest::Approx(0.7858525).epsilon(1e-12));
    }
}

TEST_CASE("rank-then-aggregate ranks within each case and label first") {
    MetricRecords records = constant_records({"A", "B"}, {0.9, 0.8}, {1.0, 2.0}, {0.9, 0.8}, 3, 2);
    // Flip one cell so the per-cell ranks are not unanimous.
    for (auto& r : records.dsc)
        if (r.team == "B" && r.case_id == "case_0" && r.label_code == 1)
            r.value = 0.95;
    RankScheme scheme{RankOrder::RankThenAggregate, Aggregator::Mean};
    auto values = rank::aggregate_metric(records.dsc, Metric::DSC, scheme);
    REQUIRE(values.size() == 2);
    // A wins 5 of 6 cells: mean rank (1*5+2)/6; B gets (2*5+1)/6.
    CHECK(values[0].team == "A");
    CHECK(values[0].value == doctest::Approx(7.0 / 6.0).epsilon(1e-15));
    CHECK(values[1].value == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("competition ranks share the minimum and skip the next") {
    TeamValues values{{"a", 0.9}, {"b", 0.8}, {"c", 0.8}, {"d", 0.7}};
    auto table = rank::rank_values(values, Direction::HigherBetter);
    CHECK(table.rank_of("a") == 1);
    CHECK(table.rank_of("b") == 2);
    CHECK(table.rank_of("c") == 2);
    CHECK(table.rank_of("d") == 4);

    SUBCASE("lower-better flips the order") {
        auto flipped = rank::rank_values(values, Direction::LowerBetter);
        CHECK(flipped.rank_of("d") == 1);
        CHECK(flipped.rank_of("a") == 4);
    }
    SUBCASE("epsilon widens ties") {
        TeamValues close{{"a", 0.9000001}, {"b", 0.9}, {"c", 0.5}};
        CHECK(rank::rank_values(close, Direction::HigherBetter).rank_of("b") == 2);
        auto loose = rank::rank_values(close, Direction::HigherBetter, 1e-6);
        CHECK(loose.rank_of("a") == 1);
        CHECK(loose.rank_of("b") == 1);
        CHECK(loose.rank_of("c") == 3);
    }
}

TEST_CASE("rank order is invariant under monotone transforms and permutations") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        TeamValues values;
        for (int t = 0; t < 9; ++t)
            values.push_back({"team_" + std::to_string(t), value(rng)});
        auto base = rank::rank_values(values, Direction::HigherBetter);

        TeamValues transformed = values;
        for (auto& v : transformed)
            v.value = std::exp(3.0 * v.value) + 1.0;
        auto mapped = rank::rank_values(transformed, Direction::HigherBetter);

        TeamValues shuffled = values;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto permuted = rank::rank_values(shuffled, Direction::HigherBetter);

        for (const auto& v : values) {
            CHECK(mapped.rank_of(v.team) == base.rank_of(v.team));
            CHECK(permuted.rank_of(v.team) == base.rank_of(v.team));
        }
    }
}

TEST_CASE("golden leaderboard reproduction") {
    auto dsc = rank::rank_values(leaderboard_column(&golden::Entry::dsc_mean),
                                 Direction::HigherBetter);
    auto hd95 = rank::rank_values(leaderboard_column(&golden::Entry::hd95_mean),
                                  Direction::LowerBetter);
    auto vs = rank::rank_values(leaderboard_column(&golden::Entry::vs_mean),
                                Direction::HigherBetter);

    SUBCASE("per-metric ranks match the published tables") {
        for (std::size_t i = 0; i < golden::kLeaderboard.size(); ++i) {
            const auto& e = golden::kLeaderboard[i];
            CHECK(dsc.rank_of(e.team) == static_cast<int>(i) + 1);
            CHECK(hd95.rank_of(e.team) == e.hd95_rank);
            CHECK(vs.rank_of(e.team) == e.vs_rank);
        }
    }
    SUBCASE("combined ranking reproduces the final table including ties") {
        auto combined = rank::combined_ranking({dsc, hd95, vs});
        for (const auto& e : golden::kLeaderboard)
            CHECK(combined.rank_of(e.team) == e.final_rank);
        CHECK(combined.rank_of("Hilab") == combined.rank_of("Neurophet"));
        CHECK(combined.rank_of("2Ai") == combined.rank_of("xlab"));
        CHECK(combined.rank_of("Physense-UPF Team") == combined.rank_of("muw_dsobotka"));
        CHECK(combined.rank_of("Physense-UPF Team") == combined.rank_of("ichilove-combi"));
        CHECK(combined.aggregate_of("NVAUTO") == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    }
}

TEST_CASE("combined ranking means the three per-metric ranks") {
    SUBCASE("tied means share the final rank and skip the next") {
        TeamValues m1{{"H", 0.9}, {"N", 0.7}, {"x", 0.5}};
        auto mk = [](std::vector<std::pair<std::string, int>> rs) {
            rank::RankingTable t;
            for (auto& [team, r] : rs)
                t.rows.push_back({team, 0.0, r});
            return t;
        };
        auto combined = rank::combined_ranking(
            {mk({{"H", 5}, {"N", 3}, {"x", 1}}), mk({{"H", 2}, {"N", 9}, {"x", 1}}),
             mk({{"H", 10}, {"N", 5}, {"x", 20}})});
        CHECK(combined.aggregate_of("H") == combined.aggregate_of("N"));
        CHECK(combined.rank_of("H") == 1);
        CHECK(combined.rank_of("N") == 1);
        CHECK(combined.rank_of("x") == 3);
        (void)m1;
    }
    SUBCASE("single team ranks first") {
        rank::RankingTable t;
        t.rows.push_back({"solo", 0.5, 1});
        auto combined = rank::combined_ranking({t, t, t});
        CHECK(combined.rank_of("solo") == 1);
    }
    SUBCASE("identical per-metric tables keep their ranks") {
        TeamValues values{{"a", 0.9}, {"b", 0.8}, {"c", 0.7}};
        auto t = rank::rank_values(values, Direction::HigherBetter);
        auto combined = rank::combined_ranking({t, t, t});
        for (const auto& v : values)
            CHECK(combined.rank_of(v.team) == t.rank_of(v.team));
    }
    SUBCASE("mismatched team sets are rejected") {
        rank::RankingTable t1, t2;
        t1.rows.push_back({"a", 0.5, 1});
        t2.rows.push_back({"b", 0.5, 1});
        CHECK_THROWS_AS(rank::combined_ranking({t1, t2, t1}), TeamSetMismatch);
    }
}

TEST_CASE("full pipeline on records") {
    MetricRecords records =
        constant_records({"A", "B", "C"}, {0.9, 0.8, 0.7}, {1.0, 2.0, 3.0}, {0.9, 0.8, 0.7});

    SUBCASE("dominant team ranks first everywhere") {
        auto result = rank::challenge_ranking(records);
        CHECK(result.dsc.rank_of("A") == 1);
        CHECK(result.hd95.rank_of("A") == 1);
        CHECK(result.vs.rank_of("A") == 1);
        CHECK(result.combined.rank_of("A") == 1);
        CHECK(result.combined.rank_of("C") == 3);
        CHECK(result.combined.metric == "combined");
    }
    SUBCASE("per-label ranking restricts to one label") {
        // Make C dominate label 2 only.
        for (auto& r : records.dsc)
            if (r.label_code == 2)
                r.value = r.team == "C" ? 0.99 : 0.1;
        for (auto& r : records.hd95)
            if (r.label_code == 2)
                r.value = r.team == "C" ? 0.5 : 9.0;
        for (auto& r : records.vs)
            if (r.label_code == 2)
                r.value = r.team == "C" ? 0.99 : 0.1;
        auto label2 = rank::per_label_ranking(records, 2);
        CHECK(label2.rank_of("C") == 1);
        auto label1 = rank::per_label_ranking(records, 1);
        CHECK(label1.rank_of("A") == 1);
        CHECK(label1.rank_of("C") == 3);
        CHECK_THROWS_AS(rank::per_label_ranking(records, 7), UnknownLabel);
    }
    SUBCASE("identical teams tie at rank 1 per label") {
        MetricRecords twins =
            constant_records({"A", "B"}, {0.8, 0.8}, {2.0, 2.0}, {0.8, 0.8});
        auto table = rank::per_label_ranking(twins, 1);
        CHECK(table.rank_of("A") == 1);
        CHECK(table.rank_of("B") == 1);
    }
}

TEST_CASE("subset ranking") {
    MetricRecords records =
        constant_records({"A", "B"}, {0.9, 0.8}, {1.0, 2.0}, {0.9, 0.8}, 4, 2);
    SUBCASE("identity filter matches the full pipeline") {
        auto all = rank::challenge_ranking(records).combined;
        auto subset =
            rank::subset_ranking(records, {"case_0", "case_1", "case_2", "case_3"});
        for (const auto& row : all.rows)
            CHECK(subset.rank_of(row.team) == row.rank);
    }
    SUBCASE("the loser globally can win a subset") {
        // B beats A on case_3 only, mildly enough that A keeps the global lead.
        for (auto& r : records.dsc)
            if (r.case_id == "case_3")
                r.value = r.team == "B" ? 0.85 : 0.75;
        for (auto& r : records.hd95)
            if (r.case_id == "case_3")
                r.value = r.team == "B" ? 1.5 : 2.5;
        for (auto& r : records.vs)
            if (r.case_id == "case_3")
                r.value = r.team == "B" ? 0.85 : 0.75;
        CHECK(rank::challenge_ranking(records).combined.rank_of("A") == 1);
        auto subset = rank::subset_ranking(records, {"case_3"});
        CHECK(subset.rank_of("B") == 1);
        CHECK(subset.rank_of("A") == 2);
    }
    SUBCASE("a four-case subset runs on exactly those cases") {
        MetricRecords wide =
            constant_records({"A", "B"}, {0.9, 0.8}, {1.0, 2.0}, {0.9, 0.8}, 40, 1);
        auto subset = rank::subset_ranking(wide, {"case_0", "case_1", "case_2", "case_3"});
        CHECK(subset.rows.size() == 2);
        CHECK(subset.rank_of("A") == 1);
    }
    SUBCASE("empty filter is rejected") {
        CHECK_THROWS_AS(rank::subset_ranking(records, {"missing_case"}), EmptySubset);
    }
}

TEST_CASE("ranking method sweep") {
    SUBCASE("unanimous records agree across all four schemes") {
        MetricRecords records =
            constant_records({"A", "B", "C"}, {0.9, 0.8, 0.7}, {1.0, 2.0, 3.0}, {0.9, 0.8, 0.7});
        auto sweep = rank::ranking_method_sweep(records);
        REQUIRE(sweep.size() == 4);
        for (const auto& [scheme, table] : sweep) {
            CHECK(table.rank_of("A") == 1);
            CHECK(table.rank_of("B") == 2);
            CHECK(table.rank_of("C") == 3);
        }
    }
    SUBCASE("an outlier case separates mean from median") {
        MetricRecords records =
            constant_records({"A", "B"}, {0.8, 0.7}, {1.0, 2.0}, {0.8, 0.7}, 5, 1);
        // One catastrophic case for A drags its mean below B but not its median.
        for (auto& r : records.dsc)
            if (r.team == "A" && r.case_id == "case_4")
                r.value = 0.0;
        for (auto& r : records.hd95)
            if (r.team == "A" && r.case_id == "case_4")
                r.value = 50.0;
        for (auto& r : records.vs)
            if (r.team == "A" && r.case_id == "case_4")
                r.value = 0.0;
        auto sweep = rank::ranking_method_sweep(records);
        int mean_rank_a = 0, median_rank_a = 0;
        for (const auto& [scheme, table] : sweep) {
            if (scheme.order != RankOrder::AggregateThenRank)
                continue;
            if (scheme.aggregator == Aggregator::Mean)
                mean_rank_a = table.rank_of("A");
            else
                median_rank_a = table.rank_of("A");
        }
        CHECK(mean_rank_a == 2);
        CHECK(median_rank_a == 1);
    }
    SUBCASE("a single team ranks first under every scheme") {
        MetricRecords solo = constant_records({"only"}, {0.5}, {3.0}, {0.5});
        for (const auto& [scheme, table] : rank::ranking_method_sweep(solo))
            CHECK(table.rank_of("only") == 1);
    }
}

TEST_CASE("wide rows split into per-metric records") {
    using metrics::MetricCell;
    std::vector<rank::CaseRow> rows(3);
    rows[0].team = "A";
    rows[0].case_id = "c1";
    rows[0].label_code = 1;
    rows[0].label_name = "eCSF";
    rows[0].dsc = MetricCell::of(0.9);
    rows[0].vs = MetricCell::of(0.95);
    rows[0].hd = MetricCell::of(4.0);
    rows[0].hd95 = MetricCell::of(2.0);
    rows[0].gt_present = rows[0].pred_present = true;
    rows[0].gt_voxels = 100;
    rows[0].pred_voxels = 90;

    rows[1] = rows[0];
    rows[1].label_code = 2;
    rows[1].label_name = "GM";
    rows[1].dsc = MetricCell::of(0.0);
    rows[1].vs = MetricCell::of(0.0);
    rows[1].hd = MetricCell::missing();
    rows[1].hd95 = MetricCell::missing();
    rows[1].pred_present = false;
    rows[1].pred_voxels = 0;

    rows[2] = rows[0];
    rows[2].label_code = 3;
    rows[2].label_name = "WM";
    rows[2].dsc = MetricCell::not_applicable();
    rows[2].vs = MetricCell::not_applicable();
    rows[2].hd = MetricCell::not_applicable();
    rows[2].hd95 = MetricCell::not_applicable();
    rows[2].gt_present = false;
    rows[2].gt_voxels = 0;

    auto records = rank::split_records(rows);
    CHECK(records.dsc.size() == 2);
    CHECK(records.hd95.size() == 2);
    CHECK(records.vs.size() == 2);
    CHECK(records.dsc[1].value == 0.0);
    CHECK_FALSE(records.hd95[1].value.has_value());

    SUBCASE("CSV round trip preserves every cell") {
        auto table = rank::rows_to_table(rows);
        CHECK(table.header[0] == "team");
        auto back = rank::rows_from_table(table);
        REQUIRE(back.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(back[i].team == rows[i].team);
            CHECK(back[i].case_id == rows[i].case_id);
            CHECK(back[i].label_code == rows[i].label_code);
            CHECK(back[i].label_name == rows[i].label_name);
            CHECK(back[i].dsc.state == rows[i].dsc.state);
            CHECK(back[i].dsc.value == rows[i].dsc.value);
            CHECK(back[i].hd95.state == rows[i].hd95.state);
            CHECK(back[i].gt_present == rows[i].gt_present);
            CHECK(back[i].pred_present == rows[i].pred_present);
            CHECK(back[i].gt_voxels == rows[i].gt_voxels);
            CHECK(back[i].pred_voxels == rows[i].pred_voxels);
        }
    }
}
