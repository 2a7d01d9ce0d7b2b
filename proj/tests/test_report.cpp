#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "segrank/csv.hpp"
#include "segrank/report.hpp"

using namespace segrank;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("segrank_report_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// 12x10x8 grid with each foreground label as one 8x6 plane at x = code + 2.
io::LabelVolume reference_volume() {
    io::LabelVolume v;
    v.dims = {12, 10, 8};
    v.spacing = {0.5, 0.5, 0.5};
    v.voxels.assign(static_cast<std::size_t>(v.voxel_count()), 0);
    for (int label = 1; label <= 7; ++label)
        for (int z = 1; z < 7; ++z)
            for (int y = 1; y < 9; ++y)
                v.voxels[static_cast<std::size_t>(v.index(label + 2, y, z))] =
                    static_cast<std::uint8_t>(label);
    return v;
}

/// Clears the first `per_label` voxels of every label, in scan order.
io::LabelVolume degraded(const io::LabelVolume& gt, int per_label) {
    io::LabelVolume v = gt;
    std::array<int, 8> left{};
    left.fill(per_label);
    for (auto& code : v.voxels)
        if (code != 0 && left[code] > 0) {
            --left[code];
            code = 0;
        }
    return v;
}

const std::vector<std::string> kCases{"case_a", "case_b", "case_c"};

struct Corpus {
    fs::path gt;
    fs::path pred;
    fs::path manifest;
    fs::path out;
};

Corpus make_corpus(const std::string& tag, bool omit_one = false, bool bad_grid = false) {
    const fs::path root = fresh_dir(tag);
    Corpus c{root / "gt", root / "pred", root / "manifest.csv", root / "out"};
    fs::create_directories(c.gt);
    const auto gt = reference_volume();
    for (const auto& id : kCases)
        io::write_nifti(gt, c.gt / (id + ".nii.gz"));

    const std::map<std::string, int> severity{{"alpha", 0}, {"beta", 2}, {"gamma", 8}};
    for (const auto& [team, base] : severity) {
        fs::create_directories(c.pred / team);
        for (std::size_t ci = 0; ci < kCases.size(); ++ci) {
            if (omit_one && team == "gamma" && kCases[ci] == "case_b")
                continue;
            io::LabelVolume v =
                base == 0 ? gt : degraded(gt, base + static_cast<int>(ci));
            if (bad_grid && team == "gamma" && kCases[ci] == "case_b") {
                v.dims = {11, 10, 8};
                v.voxels.assign(static_cast<std::size_t>(v.voxel_count()), 1);
            }
            const std::string name = (team == "alpha" && kCases[ci] == "case_a")
                                         ? kCases[ci] + "_seg.nii.gz"
                                         : kCases[ci] + ".nii.gz";
            io::write_nifti(v, c.pred / team / name);
        }
    }
    spit(c.manifest,
         "case_id,ga_weeks,pathological,sr_method,quality_r1,quality_r2,quality_r3,split\n"
         "case_a,24.5,1,mialSR,Excellent,Good,Good,test\n"
         "case_b,30.2,0,IRTK,Good,Good,Excellent,test\n"
         "case_c,27.0,1,mialSR,Excellent,Excellent,Good,test\n");
    return c;
}

report::RunConfig base_config(const Corpus& c) {
    report::RunConfig cfg;
    cfg.gt_dir = c.gt;
    cfg.pred_root = c.pred;
    cfg.manifest_path = c.manifest;
    cfg.output_dir = c.out;
    cfg.bootstrap_b = 40;
    cfg.seed = 9;
    cfg.jobs = 2;
    return cfg;
}

std::map<std::string, int> ranks_of(const fs::path& csv_path) {
    const auto table = csv::read_csv(csv_path);
    std::map<std::string, int> ranks;
    for (const auto& row : table.rows)
        ranks[row[0]] = static_cast<int>(csv::parse_long(row[2]));
    return ranks;
}

} // namespace

TEST_CASE("full run produces every table with consistent content") {
    const Corpus c = make_corpus("full");
    const auto cfg = base_config(c);
    const auto result = report::run_all(cfg);

    REQUIRE(result.warnings.size() == 1);
    CHECK(result.warnings[0].find("quality_poor") != std::string::npos);

    const auto metrics = csv::read_csv(c.out / "metrics.csv");
    CHECK(metrics.rows.size() == 3 * 3 * 7);

    const auto combined = ranks_of(c.out / "ranking_combined.csv");
    CHECK(combined.at("alpha") == 1);
    CHECK(combined.at("beta") == 2);
    CHECK(combined.at("gamma") == 3);
    for (const char* metric : {"dsc", "hd95", "vs"}) {
        const auto ranks = ranks_of(c.out / ("ranking_" + std::string(metric) + ".csv"));
        CHECK(ranks.at("alpha") == 1);
        CHECK(ranks.at("gamma") == 3);
    }

    const auto per_label = csv::read_csv(c.out / "ranking_per_label.csv");
    CHECK(per_label.rows.size() == 7 * 3);
    std::set<std::string> label_names;
    for (const auto& row : per_label.rows)
        label_names.insert(row[1]);
    CHECK(label_names.size() == 7);
    CHECK(label_names.count("brainstem") == 1);

    const auto methods = csv::read_csv(c.out / "ranking_methods.csv");
    CHECK(methods.rows.size() == 4 * 3);

    const auto subsets = csv::read_csv(c.out / "ranking_subsets.csv");
    std::set<std::string> subset_names;
    for (const auto& row : subsets.rows)
        subset_names.insert(row[0]);
    const std::set<std::string> expected{"pathological", "non_pathological", "mialSR",
                                         "IRTK",         "quality_excellent", "quality_good",
                                         "ga_young",     "ga_old"};
    CHECK(subset_names == expected);

    for (const char* metric : {"dsc", "hd95", "vs"}) {
        const std::string m = metric;
        const auto sig = csv::read_csv(c.out / ("significance_" + m + ".csv"));
        REQUIRE(sig.rows.size() == 3);
        REQUIRE(sig.header.size() == 4);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(csv::parse_double(sig.rows[i][i + 1]) == 1.0);

        const auto podium = csv::read_csv(c.out / ("plot_podium_" + m + ".csv"));
        CHECK(podium.rows.size() == 3 * 3);
        std::map<std::string, std::set<std::string>> winners;
        for (const auto& row : podium.rows)
            if (row[3] == "1")
                winners[row[0]].insert(row[1]);
        CHECK(winners.size() == 3);
        for (const auto& [case_id, teams] : winners) {
            CHECK(teams.count("alpha") == 1);
            if (m != "hd95")
                CHECK(teams.size() == 1);
        }

        const auto heat = csv::read_csv(c.out / ("plot_heatmap_" + m + ".csv"));
        std::map<std::string, long> totals;
        for (const auto& row : heat.rows)
            totals[row[0]] += csv::parse_long(row[2]);
        for (const auto& [team, total] : totals)
            CHECK(total == 3);

        const auto blob = csv::read_csv(c.out / ("plot_blob_" + m + ".csv"));
        std::map<std::string, double> mass;
        for (const auto& row : blob.rows)
            mass[row[0]] += csv::parse_double(row[2]);
        for (const auto& [team, total] : mass)
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }

    const auto icv = csv::read_csv(c.out / "icv.csv");
    CHECK(icv.rows.size() == 9);
    const auto icv_summary = csv::read_csv(c.out / "icv_summary.csv");
    REQUIRE(icv_summary.rows.size() == 3);
    for (const auto& row : icv_summary.rows)
        if (row[0] == "alpha") {
            CHECK(csv::parse_double(row[1]) == 0.0);
            CHECK(row[2] == "1");
        }

    const auto agreement = nlohmann::json::parse(slurp(c.out / "agreement.json"));
    CHECK(agreement["items"] == 3);
    CHECK(agreement["ac2_ordinal"].contains("coefficient"));

    const auto taus = csv::read_csv(c.out / "tau_summary.csv");
    CHECK(taus.rows.size() == 4);

    const auto boots = nlohmann::json::parse(slurp(c.out / "bootstrap_combined.json"));
    CHECK(boots["b"] == 40);
    CHECK(boots["seed"] == 9);
    CHECK(boots["teams"].size() == 3);

    const auto index = nlohmann::json::parse(slurp(c.out / "index.json"));
    std::set<std::string> on_disk;
    for (const auto& entry : fs::directory_iterator(c.out))
        if (entry.path().filename() != "index.json")
            on_disk.insert(entry.path().filename().string());
    std::set<std::string> listed;
    for (const auto& file : index["files"]) {
        listed.insert(file["name"]);
        const fs::path path = c.out / std::string(file["name"]);
        CHECK(file["bytes"] == fs::file_size(path));
        CHECK(file["sha256"] == report::sha256_hex(path));
    }
    CHECK(listed == on_disk);
    CHECK(index["metadata"]["seed"] == 9);
}

TEST_CASE("identical predictions tie every team at rank one") {
    const fs::path root = fresh_dir("tie");
    Corpus c{root / "gt", root / "pred", {}, root / "out"};
    fs::create_directories(c.gt);
    const auto gt = reference_volume();
    for (const auto& id : kCases)
        io::write_nifti(gt, c.gt / (id + ".nii"));
    for (const char* team : {"alpha", "beta", "gamma"}) {
        fs::create_directories(c.pred / team);
        for (const auto& id : kCases)
            io::write_nifti(gt, c.pred / team / (id + ".nii"));
    }
    auto cfg = base_config(c);
    cfg.manifest_path.clear();
    report::run_all(cfg);
    for (const auto& [team, rank] : ranks_of(c.out / "ranking_combined.csv"))
        CHECK(rank == 1);
}

TEST_CASE("a missing prediction file becomes missing rows plus a warning") {
    const Corpus c = make_corpus("missing", true);
    const auto cfg = base_config(c);
    const auto evaluation = report::evaluate_all(cfg);

    bool warned = false;
    for (const auto& w : evaluation.warnings)
        warned = warned || (w.find("gamma") != std::string::npos &&
                            w.find("case_b") != std::string::npos);
    CHECK(warned);

    int missing_rows = 0;
    for (const auto& row : evaluation.rows)
        if (row.team == "gamma" && row.case_id == "case_b") {
            ++missing_rows;
            CHECK(metrics::cell_text(row.dsc) == "MISSING");
            CHECK(metrics::cell_text(row.hd95) == "MISSING");
            CHECK_FALSE(row.pred_present);
        }
    CHECK(missing_rows == 7);

    for (const auto& row : evaluation.icv)
        if (row.team == "gamma" && row.case_id == "case_b") {
            CHECK(metrics::cell_text(row.pred_mm3) == "MISSING");
            CHECK(row.gt_mm3 > 0.0);
        }

    report::run_all(cfg);
    CHECK(ranks_of(c.out / "ranking_combined.csv").at("gamma") == 3);
}

TEST_CASE("a prediction on a different grid aborts the run") {
    const Corpus c = make_corpus("grid", false, true);
    CHECK_THROWS_AS(report::evaluate_all(base_config(c)), GridMismatch);
    try {
        report::evaluate_all(base_config(c));
    } catch (const GridMismatch& e) {
        const std::string msg = e.what();
        CHECK(msg.find("gamma") != std::string::npos);
        CHECK(msg.find("case_b") != std::string::npos);
    }
}

TEST_CASE("duplicate reference stems are rejected") {
    const Corpus c = make_corpus("dup");
    io::write_nifti(reference_volume(), c.gt / "case_a.nii");
    CHECK_THROWS_AS(report::evaluate_all(base_config(c)), DuplicateCase);
}

TEST_CASE("parallel and serial runs write identical outputs") {
    const Corpus serial_corpus = make_corpus("serial");
    const Corpus parallel_corpus = make_corpus("parallel");
    auto serial_cfg = base_config(serial_corpus);
    serial_cfg.jobs = 1;
    auto parallel_cfg = base_config(parallel_corpus);
    parallel_cfg.jobs = 4;
    report::run_all(serial_cfg);
    report::run_all(parallel_cfg);

    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(serial_corpus.out))
        names.insert(entry.path().filename().string());
    std::set<std::string> parallel_names;
    for (const auto& entry : fs::directory_iterator(parallel_corpus.out))
        parallel_names.insert(entry.path().filename().string());
    REQUIRE(names == parallel_names);

    for (const auto& name : names) {
        if (name == "index.json")
            continue;
        INFO(name);
        CHECK(slurp(serial_corpus.out / name) == slurp(parallel_corpus.out / name));
    }
    const auto serial_index = nlohmann::json::parse(slurp(serial_corpus.out / "index.json"));
    const auto parallel_index =
        nlohmann::json::parse(slurp(parallel_corpus.out / "index.json"));
    CHECK(serial_index["files"] == parallel_index["files"]);
}

TEST_CASE("ranking and reporting before evaluation are missing-input errors") {
    const fs::path root = fresh_dir("noinput");
    report::RunConfig cfg;
    cfg.gt_dir = root;
    cfg.pred_root = root;
    cfg.output_dir = root / "out";
    fs::create_directories(cfg.output_dir);
    CHECK_THROWS_AS(report::cmd_rank(cfg), MissingInput);
    CHECK_THROWS_AS(report::cmd_stats(cfg), MissingInput);
    CHECK_THROWS_AS(report::cmd_report(cfg), MissingInput);
    CHECK_THROWS_AS(report::evaluate_all(cfg), MissingInput);
}

TEST_CASE("a subset restricts evaluation to matching manifest cases") {
    const Corpus c = make_corpus("subset");
    auto cfg = base_config(c);
    cfg.subset = "pathological";
    const auto result = report::cmd_evaluate(cfg);
    const auto metrics = csv::read_csv(c.out / "metrics.csv");
    std::set<std::string> cases;
    for (const auto& row : metrics.rows)
        cases.insert(row[1]);
    CHECK(cases == std::set<std::string>{"case_a", "case_c"});

    cfg.subset = "quality_poor";
    CHECK_THROWS_AS(report::evaluate_all(cfg), EmptySubset);
    cfg.subset = "no_such_axis";
    CHECK_THROWS_AS(report::evaluate_all(cfg), Error);
    cfg.subset = "pathological";
    cfg.manifest_path.clear();
    CHECK_THROWS_AS(report::evaluate_all(cfg), MissingInput);
}

TEST_CASE("configuration bounds are enforced") {
    report::RunConfig cfg;
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.hd_percentile = 101.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.bootstrap_b = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("value parsers cover every accepted name") {
    auto scheme = report::parse_rank_scheme("mean");
    CHECK(scheme.order == rank::RankOrder::AggregateThenRank);
    CHECK(scheme.aggregator == rank::Aggregator::Mean);
    scheme = report::parse_rank_scheme("median");
    CHECK(scheme.aggregator == rank::Aggregator::Median);
    scheme = report::parse_rank_scheme("rank-then-mean");
    CHECK(scheme.order == rank::RankOrder::RankThenAggregate);
    scheme = report::parse_rank_scheme("rank-then-median");
    CHECK(scheme.aggregator == rank::Aggregator::Median);
    CHECK_THROWS_AS(report::parse_rank_scheme("best"), Error);

    CHECK(report::parse_units("voxels") == metrics::HdUnits::Voxels);
    CHECK(report::parse_units("mm") == metrics::HdUnits::Millimetres);
    CHECK_THROWS_AS(report::parse_units("inches"), Error);
}

TEST_CASE("label scheme files load with the smallest code as background") {
    const fs::path dir = fresh_dir("scheme");
    spit(dir / "scheme.csv", "code,name\n3,first\n1,second\n9,third\n");
    const auto scheme = report::load_label_scheme(dir / "scheme.csv");
    CHECK(scheme.entries.size() == 3);
    CHECK(scheme.background_code == 1);
    CHECK(scheme.foreground_codes() == std::vector<int>{3, 9});

    spit(dir / "dup.csv", "code,name\n1,a\n1,b\n");
    CHECK_THROWS_AS(report::load_label_scheme(dir / "dup.csv"), ParseError);
    spit(dir / "empty.csv", "code,name\n");
    CHECK_THROWS_AS(report::load_label_scheme(dir / "empty.csv"), ParseError);
    spit(dir / "nocol.csv", "id,name\n1,a\n");
    CHECK_THROWS_AS(report::load_label_scheme(dir / "nocol.csv"), Error);
}

TEST_CASE("ratings are read from any table with quality columns") {
    const fs::path dir = fresh_dir("ratings");
    spit(dir / "r.csv", "case_id,quality_r1,quality_r2\nx,Excellent,\ny,Good,Poor\n");
    const auto ratings = report::read_ratings(dir / "r.csv");
    REQUIRE(ratings.size() == 2);
    CHECK(ratings[0].first == "x");
    CHECK(ratings[0].second == std::vector<cohort::Quality>{cohort::Quality::Excellent});
    CHECK(ratings[1].second.size() == 2);

    CHECK_THROWS_AS(report::read_ratings(dir / "absent.csv"), MissingInput);
    spit(dir / "bare.csv", "case_id,split\nx,test\n");
    CHECK_THROWS_AS(report::read_ratings(dir / "bare.csv"), SchemaError);
}

TEST_CASE("checksums match a published digest") {
    const fs::path dir = fresh_dir("sha");
    spit(dir / "abc.txt", "abc");
    CHECK(report::sha256_hex(dir / "abc.txt") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("a metric subset drops combined-rank outputs") {
    const Corpus c = make_corpus("subset_metrics");
    auto cfg = base_config(c);
    report::cmd_evaluate(cfg);
    cfg.metrics = {rank::Metric::DSC};
    report::cmd_rank(cfg);
    report::cmd_stats(cfg);
    CHECK(fs::is_regular_file(c.out / "ranking_dsc.csv"));
    CHECK(fs::is_regular_file(c.out / "bootstrap_dsc.json"));
    CHECK(fs::is_regular_file(c.out / "significance_dsc.csv"));
    CHECK_FALSE(fs::is_regular_file(c.out / "ranking_combined.csv"));
    CHECK_FALSE(fs::is_regular_file(c.out / "ranking_hd95.csv"));
    CHECK_FALSE(fs::is_regular_file(c.out / "bootstrap_combined.json"));
    CHECK(csv::read_csv(c.out / "tau_summary.csv").rows.size() == 1);
    report::cmd_report(cfg);
    CHECK(fs::is_regular_file(c.out / "plot_podium_dsc.csv"));
    CHECK_FALSE(fs::is_regular_file(c.out / "plot_blob_combined.csv"));

    cfg.metrics = {rank::Metric::DSC, rank::Metric::DSC};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.metrics = {};
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("svg emission adds figures to the report") {
    const Corpus c = make_corpus("svg");
    auto cfg = base_config(c);
    cfg.emit_svg = true;
    cfg.bootstrap_b = 10;
    report::run_all(cfg);
    for (const char* name : {"plot_box_dsc.svg", "plot_blob_combined.svg",
                             "plot_significance_vs.svg"}) {
        const std::string text = slurp(c.out / name);
        CHECK(text.rfind("<svg", 0) == 0);
        CHECK(text.find("</svg>") != std::string::npos);
    }
}
