#include "segrank/report.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "segrank/csv.hpp"

namespace segrank::report {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (!(hd_percentile > 0.0 && hd_percentile <= 100.0))
        throw Error("hd percentile must be in (0, 100]");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error("alpha must be in (0, 1)");
    if (bootstrap_b < 1)
        throw Error("bootstrap sample count must be at least 1");
    if (jobs < 1)
        throw Error("worker count must be at least 1");
    if (metrics.empty())
        throw Error("at least one metric must be selected");
    for (std::size_t i = 0; i < metrics.size(); ++i)
        for (std::size_t j = i + 1; j < metrics.size(); ++j)
            if (metrics[i] == metrics[j])
                throw Error("duplicate metric selection");
}

std::vector<std::pair<std::string, cohort::CasePredicate>> subset_axes() {
    using cohort::CasePredicate;
    std::vector<std::pair<std::string, CasePredicate>> axes;
    CasePredicate p;
    p.pathological = true;
    axes.emplace_back("pathological", p);
    p.pathological = false;
    axes.emplace_back("non_pathological", p);
    p = {};
    p.sr_method = cohort::SrMethod::MialSr;
    axes.emplace_back("mialSR", p);
    p.sr_method = cohort::SrMethod::Irtk;
    axes.emplace_back("IRTK", p);
    p = {};
    p.quality = cohort::Quality::Excellent;
    axes.emplace_back("quality_excellent", p);
    p.quality = cohort::Quality::Good;
    axes.emplace_back("quality_good", p);
    p.quality = cohort::Quality::Poor;
    axes.emplace_back("quality_poor", p);
    p = {};
    p.ga_band = cohort::GaBand::Young;
    axes.emplace_back("ga_young", p);
    p.ga_band = cohort::GaBand::Old;
    axes.emplace_back("ga_old", p);
    return axes;
}

cohort::CasePredicate subset_predicate(const std::string& name) {
    for (const auto& [axis, predicate] : subset_axes())
        if (axis == name)
            return predicate;
    throw Error("unknown subset: " + name);
}

namespace {

std::string case_stem(const fs::path& path) {
    std::string name = path.filename().string();
    auto strip = [&](const std::string& suffix) {
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            name.resize(name.size() - suffix.size());
    };
    strip(".gz");
    strip(".nii");
    return name;
}

bool is_volume_file(const fs::path& path) {
    const std::string name = path.filename().string();
    return name.size() > 4 && (name.ends_with(".nii") || name.ends_with(".nii.gz"));
}

/// The manifest id must match the stem exactly or as a prefix followed by
/// a separator (sub-001 matches sub-001_T2w but not sub-0010).
bool matches_case_id(const std::string& stem, const std::string& case_id) {
    if (stem == case_id)
        return true;
    if (stem.size() > case_id.size() && stem.compare(0, case_id.size(), case_id) == 0)
        return !std::isalnum(static_cast<unsigned char>(stem[case_id.size()]));
    return false;
}

std::vector<std::pair<std::string, fs::path>> list_cases(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw MissingInput("not a directory: " + dir.string());
    std::vector<std::pair<std::string, fs::path>> cases;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_volume_file(entry.path()))
            cases.emplace_back(case_stem(entry.path()), entry.path());
    std::sort(cases.begin(), cases.end());
    for (std::size_t i = 1; i < cases.size(); ++i)
        if (cases[i].first == cases[i - 1].first)
            throw DuplicateCase("case appears twice in " + dir.string() + ": " +
                                cases[i].first);
    return cases;
}

std::optional<fs::path> resolve_prediction(const fs::path& team_dir, const std::string& stem) {
    for (const char* ext : {".nii.gz", ".nii"}) {
        const fs::path direct = team_dir / (stem + ext);
        if (fs::is_regular_file(direct))
            return direct;
    }
    std::vector<fs::path> loose;
    for (const auto& entry : fs::directory_iterator(team_dir))
        if (entry.is_regular_file() && is_volume_file(entry.path()) &&
            matches_case_id(case_stem(entry.path()), stem))
            loose.push_back(entry.path());
    if (loose.size() == 1)
        return loose.front();
    return std::nullopt;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw IoFailure("cannot write " + path.string());
}

/// Case ids of the loaded rows that fall in a manifest subset.
std::vector<std::string> subset_case_ids(const std::vector<std::string>& row_cases,
                                         const cohort::Manifest& manifest,
                                         const cohort::CasePredicate& predicate) {
    const auto ids = cohort::filter_cases(manifest, predicate);
    std::vector<std::string> matched;
    for (const auto& stem : row_cases)
        for (const auto& id : ids)
            if (matches_case_id(stem, id)) {
                matched.push_back(stem);
                break;
            }
    return matched;
}

std::vector<std::string> distinct_cases(const std::vector<rank::CaseRow>& rows) {
    std::set<std::string> cases;
    for (const auto& row : rows)
        cases.insert(row.case_id);
    return {cases.begin(), cases.end()};
}

std::vector<rank::CaseRow> apply_subset(std::vector<rank::CaseRow> rows,
                                        const RunConfig& config) {
    if (!config.subset)
        return rows;
    if (config.manifest_path.empty())
        throw MissingInput("--subset needs a manifest");
    const auto manifest = cohort::load_manifest(config.manifest_path.string());
    const auto keep = subset_case_ids(distinct_cases(rows), manifest,
                                      subset_predicate(*config.subset));
    std::vector<rank::CaseRow> filtered;
    for (auto& row : rows)
        if (std::find(keep.begin(), keep.end(), row.case_id) != keep.end())
            filtered.push_back(std::move(row));
    if (filtered.empty())
        throw EmptySubset("subset " + *config.subset + " matches no evaluated case");
    return filtered;
}

std::vector<rank::CaseRow> load_rows(const RunConfig& config) {
    const fs::path path = config.output_dir / "metrics.csv";
    if (!fs::is_regular_file(path))
        throw MissingInput("metrics table not found, run evaluate first: " + path.string());
    return apply_subset(rank::rows_from_table(csv::read_csv(path)), config);
}

csv::Table ranking_csv(const rank::RankingTable& table) {
    csv::Table out;
    out.header = {"team", "aggregate", "rank"};
    for (const auto& row : table.rows)
        out.rows.push_back({row.team, csv::fmt_double(row.aggregate), std::to_string(row.rank)});
    return out;
}

nlohmann::json bootstrap_json(const stats::BootstrapSummary& summary) {
    nlohmann::json out;
    out["b"] = summary.b;
    out["seed"] = summary.seed;
    out["teams"] = summary.teams;
    out["full_ranks"] = summary.full_ranks;
    out["frequency"] = summary.frequency;
    out["median_rank"] = summary.median_rank;
    auto& intervals = out["interval95"] = nlohmann::json::array();
    for (const auto& [lo, hi] : summary.interval95)
        intervals.push_back({lo, hi});
    out["taus"] = summary.taus;
    out["tau_summary"] = {{"mean", summary.tau_summary.mean},
                          {"median", summary.tau_summary.median},
                          {"q25", summary.tau_summary.q25},
                          {"q75", summary.tau_summary.q75}};
    return out;
}

/// True when the combined rank, which averages all three per-metric ranks,
/// is part of the requested output.
bool wants_all_metrics(const RunConfig& config) {
    return config.metrics.size() == 3;
}

struct Bootstraps {
    std::optional<stats::BootstrapSummary> combined;
    std::optional<stats::BootstrapSummary> dsc;
    std::optional<stats::BootstrapSummary> hd95;
    std::optional<stats::BootstrapSummary> vs;
};

const rank::Records& metric_slot(const rank::MetricRecords& records, rank::Metric metric) {
    switch (metric) {
    case rank::Metric::DSC:
        return records.dsc;
    case rank::Metric::HD95:
        return records.hd95;
    default:
        return records.vs;
    }
}

const std::optional<stats::BootstrapSummary>& metric_bootstrap(const Bootstraps& boots,
                                                               rank::Metric metric) {
    switch (metric) {
    case rank::Metric::DSC:
        return boots.dsc;
    case rank::Metric::HD95:
        return boots.hd95;
    default:
        return boots.vs;
    }
}

Bootstraps run_bootstraps(const rank::MetricRecords& records, const RunConfig& config) {
    stats::BootstrapConfig bc;
    bc.scheme = config.rank_scheme;
    bc.tie_epsilon = config.tie_epsilon;
    bc.b = config.bootstrap_b;
    bc.seed = config.seed;
    bc.jobs = config.jobs;
    Bootstraps out;
    if (wants_all_metrics(config))
        out.combined = stats::bootstrap_ranking(records, bc);
    for (rank::Metric metric : config.metrics) {
        auto summary = stats::bootstrap_metric_ranking(metric_slot(records, metric), metric, bc);
        switch (metric) {
        case rank::Metric::DSC:
            out.dsc = std::move(summary);
            break;
        case rank::Metric::HD95:
            out.hd95 = std::move(summary);
            break;
        default:
            out.vs = std::move(summary);
        }
    }
    return out;
}

std::string metric_slug(rank::Metric metric) {
    std::string name = rank::metric_name(metric);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return name;
}

void emit(CommandResult& result, const fs::path& path, const std::string& text) {
    write_text(path, text);
    result.files.push_back(path);
}

void emit(CommandResult& result, const fs::path& path, const csv::Table& table) {
    emit(result, path, csv::csv_text(table));
}

void emit(CommandResult& result, const fs::path& path, const nlohmann::json& json) {
    emit(result, path, json.dump(2) + "\n");
}

void write_rank_outputs(CommandResult& result, const rank::MetricRecords& records,
                        const RunConfig& config) {
    for (rank::Metric metric : config.metrics)
        emit(result, config.output_dir / ("ranking_" + metric_slug(metric) + ".csv"),
             ranking_csv(rank::metric_ranking(metric_slot(records, metric), metric,
                                              config.rank_scheme, config.tie_epsilon)));
    if (!wants_all_metrics(config))
        return;
    const auto full = rank::challenge_ranking(records, config.rank_scheme, config.tie_epsilon);
    emit(result, config.output_dir / "ranking_combined.csv", ranking_csv(full.combined));

    csv::Table per_label;
    per_label.header = {"label_code", "label_name", "team", "aggregate", "rank"};
    for (int code : config.scheme.foreground_codes()) {
        rank::RankingTable table;
        try {
            table = rank::per_label_ranking(records, code, config.rank_scheme,
                                            config.tie_epsilon);
        } catch (const UnknownLabel&) {
            result.warnings.push_back("no records for label " + std::to_string(code) +
                                      ", skipped in the per-label ranking");
            continue;
        }
        const auto* entry = config.scheme.find(code);
        for (const auto& row : table.rows)
            per_label.rows.push_back({std::to_string(code), entry->name, row.team,
                                      csv::fmt_double(row.aggregate),
                                      std::to_string(row.rank)});
    }
    emit(result, config.output_dir / "ranking_per_label.csv", per_label);

    csv::Table methods;
    methods.header = {"scheme", "team", "aggregate", "rank"};
    for (const auto& [scheme, table] : rank::ranking_method_sweep(records, config.tie_epsilon))
        for (const auto& row : table.rows)
            methods.rows.push_back({rank::scheme_name(scheme), row.team,
                                    csv::fmt_double(row.aggregate), std::to_string(row.rank)});
    emit(result, config.output_dir / "ranking_methods.csv", methods);

    if (config.manifest_path.empty())
        return;
    const auto manifest = cohort::load_manifest(config.manifest_path.string());
    std::vector<std::string> row_cases;
    {
        std::set<std::string> cases;
        for (const auto& r : records.dsc)
            cases.insert(r.case_id);
        row_cases.assign(cases.begin(), cases.end());
    }
    csv::Table subsets;
    subsets.header = {"subset", "team", "aggregate", "rank"};
    for (const auto& [axis, predicate] : subset_axes()) {
        const auto matched = subset_case_ids(row_cases, manifest, predicate);
        if (matched.empty()) {
            result.warnings.push_back("subset " + axis + " matches no case, skipped");
            continue;
        }
        const auto table =
            rank::subset_ranking(records, matched, config.rank_scheme, config.tie_epsilon);
        for (const auto& row : table.rows)
            subsets.rows.push_back({axis, row.team, csv::fmt_double(row.aggregate),
                                    std::to_string(row.rank)});
    }
    emit(result, config.output_dir / "ranking_subsets.csv", subsets);
}

void write_stats_outputs(CommandResult& result, const rank::MetricRecords& records,
                         const Bootstraps& boots, const RunConfig& config) {
    for (rank::Metric metric : config.metrics) {
        const auto matrix =
            stats::significance_matrix(metric_slot(records, metric), metric, config.alpha);
        const std::string name = metric_slug(metric);
        csv::Table adjusted, superior;
        adjusted.header = {"inferior"};
        for (const auto& team : matrix.teams)
            adjusted.header.push_back(team);
        superior.header = adjusted.header;
        for (std::size_t i = 0; i < matrix.teams.size(); ++i) {
            std::vector<std::string> p_row{matrix.teams[i]}, s_row{matrix.teams[i]};
            for (std::size_t j = 0; j < matrix.teams.size(); ++j) {
                p_row.push_back(csv::fmt_double(matrix.adjusted_p[j][i]));
                s_row.push_back(matrix.superior[j][i] ? "1" : "0");
            }
            adjusted.rows.push_back(std::move(p_row));
            superior.rows.push_back(std::move(s_row));
        }
        emit(result, config.output_dir / ("significance_" + name + ".csv"), adjusted);
        emit(result, config.output_dir / ("significance_" + name + "_superior.csv"), superior);
        emit(result, config.output_dir / ("bootstrap_" + name + ".json"),
             bootstrap_json(*metric_bootstrap(boots, metric)));
    }
    if (boots.combined)
        emit(result, config.output_dir / "bootstrap_combined.json",
             bootstrap_json(*boots.combined));

    csv::Table taus;
    taus.header = {"target", "mean", "median", "q25", "q75"};
    auto tau_row = [&](const std::string& target, const stats::TauSummary& s) {
        taus.rows.push_back({target, csv::fmt_double(s.mean), csv::fmt_double(s.median),
                             csv::fmt_double(s.q25), csv::fmt_double(s.q75)});
    };
    for (rank::Metric metric : config.metrics)
        tau_row(metric_slug(metric), metric_bootstrap(boots, metric)->tau_summary);
    if (boots.combined)
        tau_row("combined", boots.combined->tau_summary);
    emit(result, config.output_dir / "tau_summary.csv", taus);
}

void write_icv_outputs(CommandResult& result, const std::vector<IcvRow>& rows,
                       const RunConfig& config) {
    csv::Table table;
    table.header = {"team", "case", "gt_mm3", "pred_mm3", "percent_diff"};
    std::map<std::string, std::vector<double>> per_team;
    std::set<std::string> all_teams;
    for (const auto& row : rows) {
        table.rows.push_back({row.team, row.case_id, csv::fmt_double(row.gt_mm3),
                              metrics::cell_text(row.pred_mm3),
                              metrics::cell_text(row.percent_diff)});
        all_teams.insert(row.team);
        if (row.percent_diff.has_value())
            per_team[row.team].push_back(row.percent_diff.value);
    }
    emit(result, config.output_dir / "icv.csv", table);

    csv::Table summary;
    summary.header = {"team", "median_percent_diff", "within_1pct"};
    for (const auto& team : all_teams) {
        const auto it = per_team.find(team);
        if (it == per_team.end()) {
            summary.rows.push_back({team, "MISSING", "0"});
            continue;
        }
        const double median = stats::quantile_type7(it->second, 0.5);
        summary.rows.push_back(
            {team, csv::fmt_double(median), std::abs(median) <= 1.0 ? "1" : "0"});
    }
    emit(result, config.output_dir / "icv_summary.csv", summary);
}

/// Per-case competition ranks of the case-averaged metric, the podium and
/// heatmap source data.
std::map<std::string, rank::RankingTable> podium_tables(const stats::CaseAverages& averages,
                                                        rank::Metric metric) {
    std::map<std::string, rank::RankingTable> out;
    for (std::size_t c = 0; c < averages.cases.size(); ++c) {
        rank::TeamValues values;
        for (std::size_t t = 0; t < averages.teams.size(); ++t)
            values.push_back({averages.teams[t], averages.values[t][c]});
        out[averages.cases[c]] = rank::rank_values(values, rank::direction_of(metric));
    }
    return out;
}

std::string svg_header(int width, int height) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    return out.str();
}

std::string svg_box_plot(const stats::CaseAverages& averages, const std::string& title) {
    const int per_team = 40, margin = 60, height = 260;
    const int width = margin * 2 + per_team * static_cast<int>(averages.teams.size());
    double lo = 1e300, hi = -1e300;
    for (const auto& row : averages.values)
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi <= lo)
        hi = lo + 1.0;
    auto y_of = [&](double v) {
        return 20.0 + (height - 60.0) * (hi - v) / (hi - lo);
    };
    std::ostringstream out;
    out << svg_header(width, height);
    out << "<text x=\"10\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
    for (std::size_t t = 0; t < averages.teams.size(); ++t) {
        std::vector<double> sample = averages.values[t];
        const double q25 = stats::quantile_type7(sample, 0.25);
        const double q50 = stats::quantile_type7(sample, 0.5);
        const double q75 = stats::quantile_type7(sample, 0.75);
        const double vmin = *std::min_element(sample.begin(), sample.end());
        const double vmax = *std::max_element(sample.begin(), sample.end());
        const double x = margin + per_team * static_cast<double>(t) + per_team / 2.0;
        out << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << y_of(vmax)
            << "\" y2=\"" << y_of(vmin) << "\" stroke=\"black\"/>\n";
        out << "<rect x=\"" << x - 10 << "\" y=\"" << y_of(q75) << "\" width=\"20\" height=\""
            << y_of(q25) - y_of(q75) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << x - 10 << "\" x2=\"" << x + 10 << "\" y1=\"" << y_of(q50)
            << "\" y2=\"" << y_of(q50) << "\" stroke=\"black\"/>\n";
        for (double v : sample)
            out << "<circle cx=\"" << x << "\" cy=\"" << y_of(v)
                << "\" r=\"1.5\" fill=\"#08306b\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << height - 24
            << "\" font-size=\"9\" text-anchor=\"middle\" transform=\"rotate(45 " << x << ' '
            << height - 24 << ")\">" << averages.teams[t] << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_blob_plot(const stats::BootstrapSummary& summary, const std::string& title) {
    const int cell = 26, margin = 90;
    const int n = static_cast<int>(summary.teams.size());
    const int width = margin + cell * n + 20, height = margin + cell * n + 20;
    std::ostringstream out;
    out << svg_header(width, height);
    out << "<text x=\"10\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
    for (int t = 0; t < n; ++t) {
        out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + cell * t + cell / 2 + 4
            << "\" font-size=\"9\" text-anchor=\"end\">" << summary.teams[static_cast<std::size_t>(t)]
            << "</text>\n";
        out << "<text x=\"" << margin + cell * t + cell / 2 << "\" y=\"" << margin - 8
            << "\" font-size=\"9\" text-anchor=\"middle\">" << t + 1 << "</text>\n";
        for (int r = 0; r < n; ++r) {
            const double f = summary.frequency[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)];
            if (f <= 0.0)
                continue;
            out << "<circle cx=\"" << margin + cell * r + cell / 2 << "\" cy=\""
                << margin + cell * t + cell / 2 << "\" r=\"" << 0.5 * cell * std::sqrt(f)
                << "\" fill=\"#3182bd\" fill-opacity=\"0.8\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_significance(const stats::SignificanceMatrix& matrix, const std::string& title) {
    const int cell = 22, margin = 90;
    const int n = static_cast<int>(matrix.teams.size());
    const int width = margin + cell * n + 20, height = margin + cell * n + 20;
    std::ostringstream out;
    out << svg_header(width, height);
    out << "<text x=\"10\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
    for (int i = 0; i < n; ++i) {
        out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + cell * i + cell / 2 + 4
            << "\" font-size=\"9\" text-anchor=\"end\">" << matrix.teams[static_cast<std::size_t>(i)]
            << "</text>\n";
        for (int j = 0; j < n; ++j) {
            // Row = possibly inferior team, column = the team tested as
            // superior to it.
            const bool on = matrix.superior[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            out << "<rect x=\"" << margin + cell * j << "\" y=\"" << margin + cell * i
                << "\" width=\"" << cell - 2 << "\" height=\"" << cell - 2 << "\" fill=\""
                << (i == j ? "#cccccc" : (on ? "#31a354" : "#f0f0f0")) << "\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

void write_plot_outputs(CommandResult& result, const rank::MetricRecords& records,
                        const Bootstraps& boots, const RunConfig& config) {
    for (rank::Metric metric : config.metrics) {
        const std::string name = metric_slug(metric);
        const auto averages = stats::case_averages(
            rank::substitute_missing(metric_slot(records, metric), metric));

        csv::Table dotbox;
        dotbox.header = {"team", "case", "value"};
        for (std::size_t t = 0; t < averages.teams.size(); ++t)
            for (std::size_t c = 0; c < averages.cases.size(); ++c)
                dotbox.rows.push_back({averages.teams[t], averages.cases[c],
                                       csv::fmt_double(averages.values[t][c])});
        emit(result, config.output_dir / ("plot_dotbox_" + name + ".csv"), dotbox);

        const auto podium = podium_tables(averages, metric);
        csv::Table podium_csv;
        podium_csv.header = {"case", "team", "value", "rank"};
        std::map<std::string, std::map<int, int>> heat;
        for (const auto& [case_id, table] : podium) {
            for (const auto& row : table.rows) {
                podium_csv.rows.push_back({case_id, row.team, csv::fmt_double(row.aggregate),
                                           std::to_string(row.rank)});
                ++heat[row.team][row.rank];
            }
        }
        emit(result, config.output_dir / ("plot_podium_" + name + ".csv"), podium_csv);

        csv::Table heatmap;
        heatmap.header = {"team", "rank", "count"};
        for (const auto& [team, ranks] : heat)
            for (const auto& [rank_value, count] : ranks)
                heatmap.rows.push_back(
                    {team, std::to_string(rank_value), std::to_string(count)});
        emit(result, config.output_dir / ("plot_heatmap_" + name + ".csv"), heatmap);

        csv::Table blob;
        blob.header = {"team", "rank", "frequency"};
        const auto& summary = *metric_bootstrap(boots, metric);
        for (std::size_t t = 0; t < summary.teams.size(); ++t)
            for (std::size_t r = 0; r < summary.frequency[t].size(); ++r)
                if (summary.frequency[t][r] > 0.0)
                    blob.rows.push_back({summary.teams[t], std::to_string(r + 1),
                                         csv::fmt_double(summary.frequency[t][r])});
        emit(result, config.output_dir / ("plot_blob_" + name + ".csv"), blob);

        if (config.emit_svg) {
            emit(result, config.output_dir / ("plot_box_" + name + ".svg"),
                 svg_box_plot(averages, name + " per-case averages"));
            emit(result, config.output_dir / ("plot_blob_" + name + ".svg"),
                 svg_blob_plot(summary, name + " bootstrap rank frequency"));
            emit(result, config.output_dir / ("plot_significance_" + name + ".svg"),
                 svg_significance(
                     stats::significance_matrix(metric_slot(records, metric), metric,
                                                config.alpha),
                     name + " pairwise superiority"));
        }
    }

    if (!boots.combined)
        return;
    csv::Table blob;
    blob.header = {"team", "rank", "frequency"};
    for (std::size_t t = 0; t < boots.combined->teams.size(); ++t)
        for (std::size_t r = 0; r < boots.combined->frequency[t].size(); ++r)
            if (boots.combined->frequency[t][r] > 0.0)
                blob.rows.push_back({boots.combined->teams[t], std::to_string(r + 1),
                                     csv::fmt_double(boots.combined->frequency[t][r])});
    emit(result, config.output_dir / "plot_blob_combined.csv", blob);
    if (config.emit_svg)
        emit(result, config.output_dir / "plot_blob_combined.svg",
             svg_blob_plot(*boots.combined, "combined bootstrap rank frequency"));

    csv::Table lines;
    lines.header = {"scheme", "team", "rank"};
    for (const auto& [scheme, table] : rank::ranking_method_sweep(records, config.tie_epsilon))
        for (const auto& row : table.rows)
            lines.rows.push_back({rank::scheme_name(scheme), row.team, std::to_string(row.rank)});
    emit(result, config.output_dir / "plot_method_lines.csv", lines);
}

void write_index(CommandResult& result, const RunConfig& config) {
    nlohmann::json index;
    index["metadata"] = {
        {"tool", "segrank"},
        {"seed", config.seed},
        {"generated_at",
         [] {
             const auto now = std::chrono::system_clock::now();
             const std::time_t t = std::chrono::system_clock::to_time_t(now);
             char buffer[32];
             std::tm tm_utc{};
             gmtime_r(&t, &tm_utc);
             std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
             return std::string(buffer);
         }()}};
    auto& files = index["files"] = nlohmann::json::array();
    std::vector<fs::path> listed;
    for (const auto& entry : fs::directory_iterator(config.output_dir))
        if (entry.is_regular_file() && entry.path().filename() != "index.json")
            listed.push_back(entry.path());
    std::sort(listed.begin(), listed.end());
    for (const auto& path : listed)
        files.push_back({{"name", path.filename().string()},
                         {"bytes", fs::file_size(path)},
                         {"sha256", sha256_hex(path)}});
    emit(result, config.output_dir / "index.json", index);
}

struct EvalTask {
    std::string team;
    std::string case_id;
    fs::path gt;
    fs::path pred;
    std::size_t slot = 0;
};

struct SlotResult {
    std::vector<rank::CaseRow> rows;
    IcvRow icv;
};

} // namespace

Evaluation evaluate_all(const RunConfig& config) {
    config.validate();
    auto gt_cases = list_cases(config.gt_dir);
    if (gt_cases.empty())
        throw MissingInput("no reference volumes in " + config.gt_dir.string());

    if (config.subset) {
        if (config.manifest_path.empty())
            throw MissingInput("--subset needs a manifest");
        const auto manifest = cohort::load_manifest(config.manifest_path.string());
        const auto ids =
            cohort::filter_cases(manifest, subset_predicate(*config.subset));
        std::vector<std::pair<std::string, fs::path>> kept;
        for (auto& entry : gt_cases)
            for (const auto& id : ids)
                if (matches_case_id(entry.first, id)) {
                    kept.push_back(std::move(entry));
                    break;
                }
        gt_cases = std::move(kept);
        if (gt_cases.empty())
            throw EmptySubset("subset " + *config.subset + " matches no reference case");
    }

    std::vector<std::string> teams;
    if (!fs::is_directory(config.pred_root))
        throw MissingInput("not a directory: " + config.pred_root.string());
    for (const auto& entry : fs::directory_iterator(config.pred_root))
        if (entry.is_directory())
            teams.push_back(entry.path().filename().string());
    std::sort(teams.begin(), teams.end());
    if (teams.empty())
        throw MissingInput("no team directories in " + config.pred_root.string());

    Evaluation evaluation;
    evaluation.teams = teams;
    for (const auto& [stem, path] : gt_cases)
        evaluation.cases.push_back(stem);

    std::vector<EvalTask> tasks;
    std::vector<SlotResult> slots;
    for (const auto& team : teams) {
        for (const auto& [stem, gt_path] : gt_cases) {
            const auto pred = resolve_prediction(config.pred_root / team, stem);
            SlotResult placeholder;
            if (!pred) {
                evaluation.warnings.push_back("missing prediction: team " + team + ", case " +
                                              stem);
                placeholder.rows = rank::missing_case_rows(team, stem, config.scheme);
                placeholder.icv = {team, stem, 0.0, metrics::MetricCell::missing(),
                                   metrics::MetricCell::missing()};
            } else {
                tasks.push_back({team, stem, gt_path, *pred, slots.size()});
            }
            slots.push_back(std::move(placeholder));
        }
    }

    metrics::EvalOptions options;
    options.units = config.units;
    options.hd_q = config.hd_percentile;

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size())
                return;
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (failure)
                    return;
            }
            const auto& task = tasks[i];
            try {
                const auto gt = io::read_nifti(task.gt);
                const auto pred = io::read_nifti(task.pred);
                std::vector<metrics::LabelMetrics> label_metrics;
                try {
                    label_metrics = metrics::evaluate_case(gt, pred, config.scheme, options);
                } catch (const DimMismatch& e) {
                    throw GridMismatch("team " + task.team + ", case " + task.case_id + ": " +
                                       e.what());
                } catch (const SpacingMismatch& e) {
                    throw GridMismatch("team " + task.team + ", case " + task.case_id + ": " +
                                       e.what());
                }
                SlotResult done;
                done.rows = rank::rows_for_case(task.team, task.case_id, label_metrics);
                const auto gt_icv = metrics::intracranial_volume(gt, config.scheme);
                const auto pred_icv = metrics::intracranial_volume(pred, config.scheme);
                done.icv = {task.team, task.case_id, gt_icv.mm3,
                            metrics::MetricCell::of(pred_icv.mm3),
                            metrics::MetricCell::of(
                                metrics::icv_percent_difference(gt, pred, config.scheme))};
                slots[task.slot] = std::move(done);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                return;
            }
        }
    };

    const int workers =
        std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    for (auto& slot : slots) {
        for (auto& row : slot.rows)
            evaluation.rows.push_back(std::move(row));
        if (!slot.icv.team.empty())
            evaluation.icv.push_back(std::move(slot.icv));
    }
    // Reference volumes are per case, so rows whose prediction was absent
    // still get the true reference volume.
    std::map<std::string, double> gt_icv_cache;
    for (auto& row : evaluation.icv) {
        if (row.pred_mm3.has_value())
            continue;
        auto it = gt_icv_cache.find(row.case_id);
        if (it == gt_icv_cache.end()) {
            const auto gt_it = std::find_if(gt_cases.begin(), gt_cases.end(),
                                            [&](const auto& c) { return c.first == row.case_id; });
            const auto gt = io::read_nifti(gt_it->second);
            it = gt_icv_cache
                     .emplace(row.case_id,
                              metrics::intracranial_volume(gt, config.scheme).mm3)
                     .first;
        }
        row.gt_mm3 = it->second;
    }
    std::sort(evaluation.rows.begin(), evaluation.rows.end(),
              [](const rank::CaseRow& a, const rank::CaseRow& b) {
                  return std::tie(a.team, a.case_id, a.label_code) <
                         std::tie(b.team, b.case_id, b.label_code);
              });
    std::sort(evaluation.icv.begin(), evaluation.icv.end(),
              [](const IcvRow& a, const IcvRow& b) {
                  return std::tie(a.team, a.case_id) < std::tie(b.team, b.case_id);
              });
    return evaluation;
}

std::vector<std::pair<std::string, std::vector<cohort::Quality>>> read_ratings(
    const fs::path& path) {
    if (!fs::is_regular_file(path))
        throw MissingInput("ratings file not found: " + path.string());
    const auto table = csv::read_csv(path);
    int id_col = -1;
    std::vector<int> rater_cols;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (table.header[i] == "case_id")
            id_col = static_cast<int>(i);
        else if (table.header[i].rfind("quality_r", 0) == 0)
            rater_cols.push_back(static_cast<int>(i));
    }
    if (id_col < 0 || rater_cols.empty())
        throw SchemaError("ratings file needs case_id and quality_r* columns");
    std::vector<std::pair<std::string, std::vector<cohort::Quality>>> out;
    for (const auto& row : table.rows) {
        std::vector<cohort::Quality> ratings;
        for (int col : rater_cols) {
            const auto& cell = row[static_cast<std::size_t>(col)];
            if (!cell.empty())
                ratings.push_back(cohort::parse_quality(cell));
        }
        out.emplace_back(row[static_cast<std::size_t>(id_col)], std::move(ratings));
    }
    return out;
}

CommandResult cmd_evaluate(const RunConfig& config) {
    const auto evaluation = evaluate_all(config);
    CommandResult result;
    result.warnings = evaluation.warnings;
    emit(result, config.output_dir / "metrics.csv", rank::rows_to_table(evaluation.rows));
    return result;
}

CommandResult cmd_rank(const RunConfig& config) {
    config.validate();
    const auto records = rank::split_records(load_rows(config));
    CommandResult result;
    write_rank_outputs(result, records, config);
    return result;
}

CommandResult cmd_stats(const RunConfig& config) {
    config.validate();
    const auto records = rank::split_records(load_rows(config));
    const auto boots = run_bootstraps(records, config);
    CommandResult result;
    write_stats_outputs(result, records, boots, config);
    return result;
}

CommandResult cmd_agreement(const RunConfig& config) {
    config.validate();
    const auto ratings = read_ratings(config.manifest_path);
    std::vector<std::vector<int>> matrix;
    CommandResult result;
    for (const auto& [case_id, levels] : ratings) {
        if (levels.size() < 2) {
            if (!levels.empty())
                result.warnings.push_back("case " + case_id +
                                          " has a single rating, excluded from agreement");
            continue;
        }
        std::vector<int> row;
        for (cohort::Quality q : levels)
            row.push_back(static_cast<int>(q));
        matrix.push_back(std::move(row));
    }
    const auto ac2 = stats::gwet_ac(matrix, 3, stats::AgreementWeights::OrdinalQuadratic);
    const auto ac1 = stats::gwet_ac(matrix, 3, stats::AgreementWeights::Identity);
    nlohmann::json summary;
    summary["items"] = matrix.size();
    summary["ac2_ordinal"] = {{"coefficient", ac2.coefficient}, {"pa", ac2.pa}, {"pe", ac2.pe}};
    summary["ac1_identity"] = {{"coefficient", ac1.coefficient}, {"pa", ac1.pa}, {"pe", ac1.pe}};
    emit(result, config.output_dir / "agreement.json", summary);

    csv::Table table;
    table.header = {"case_id", "quality_r1", "quality_r2", "quality_r3", "median"};
    for (const auto& [case_id, levels] : ratings) {
        std::vector<std::string> row{case_id, "", "", "", ""};
        for (std::size_t r = 0; r < levels.size() && r < 3; ++r)
            row[r + 1] = cohort::quality_name(levels[r]);
        if (!levels.empty()) {
            std::vector<int> ints;
            for (cohort::Quality q : levels)
                ints.push_back(static_cast<int>(q));
            row[4] = cohort::quality_name(
                static_cast<cohort::Quality>(stats::median_ordinal(ints)));
        }
        table.rows.push_back(std::move(row));
    }
    emit(result, config.output_dir / "agreement_ratings.csv", table);
    return result;
}

CommandResult cmd_icv(const RunConfig& config) {
    const auto evaluation = evaluate_all(config);
    CommandResult result;
    result.warnings = evaluation.warnings;
    write_icv_outputs(result, evaluation.icv, config);
    return result;
}

CommandResult cmd_report(const RunConfig& config) {
    config.validate();
    const fs::path ranking =
        config.output_dir / (wants_all_metrics(config)
                                 ? "ranking_combined.csv"
                                 : "ranking_" + metric_slug(config.metrics.front()) + ".csv");
    if (!fs::is_regular_file(ranking))
        throw MissingInput("rankings not found, run rank first: " + ranking.string());
    const auto records = rank::split_records(load_rows(config));
    const auto boots = run_bootstraps(records, config);
    CommandResult result;
    write_plot_outputs(result, records, boots, config);
    write_index(result, config);
    return result;
}

CommandResult run_all(const RunConfig& config) {
    const auto evaluation = evaluate_all(config);
    CommandResult result;
    result.warnings = evaluation.warnings;
    emit(result, config.output_dir / "metrics.csv", rank::rows_to_table(evaluation.rows));
    write_icv_outputs(result, evaluation.icv, config);

    const auto records = rank::split_records(evaluation.rows);
    write_rank_outputs(result, records, config);
    const auto boots = run_bootstraps(records, config);
    write_stats_outputs(result, records, boots, config);

    if (!config.manifest_path.empty()) {
        try {
            bool rated = false;
            for (const auto& [case_id, levels] : read_ratings(config.manifest_path))
                rated = rated || levels.size() >= 2;
            if (!rated)
                throw EmptySample("manifest has no case with two or more ratings");
            auto agreement = cmd_agreement(config);
            result.files.insert(result.files.end(), agreement.files.begin(),
                                agreement.files.end());
            result.warnings.insert(result.warnings.end(), agreement.warnings.begin(),
                                   agreement.warnings.end());
        } catch (const Error& e) {
            result.warnings.push_back(std::string("agreement skipped: ") + e.what());
        }
    }

    write_plot_outputs(result, records, boots, config);
    write_index(result, config);
    return result;
}

std::string sha256_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoFailure("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx)
        throw Error("digest context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

rank::RankScheme parse_rank_scheme(const std::string& name) {
    rank::RankScheme scheme;
    if (name == "mean")
        return scheme;
    if (name == "median") {
        scheme.aggregator = rank::Aggregator::Median;
        return scheme;
    }
    if (name == "rank-then-mean") {
        scheme.order = rank::RankOrder::RankThenAggregate;
        return scheme;
    }
    if (name == "rank-then-median") {
        scheme.order = rank::RankOrder::RankThenAggregate;
        scheme.aggregator = rank::Aggregator::Median;
        return scheme;
    }
    throw Error("unknown ranking scheme: " + name +
                " (use mean, median, rank-then-mean, rank-then-median)");
}

metrics::HdUnits parse_units(const std::string& name) {
    if (name == "voxels")
        return metrics::HdUnits::Voxels;
    if (name == "mm")
        return metrics::HdUnits::Millimetres;
    throw Error("unknown units: " + name + " (use voxels or mm)");
}

io::LabelScheme load_label_scheme(const fs::path& path) {
    const auto table = csv::read_csv(path);
    const int code_col = table.column("code");
    const int name_col = table.column("name");
    io::LabelScheme scheme;
    scheme.entries.clear();
    int smallest = 0;
    for (const auto& row : table.rows) {
        io::LabelScheme::Entry entry;
        entry.code = static_cast<int>(csv::parse_long(row[static_cast<std::size_t>(code_col)]));
        entry.name = row[static_cast<std::size_t>(name_col)];
        if (scheme.entries.empty() || entry.code < smallest)
            smallest = entry.code;
        scheme.entries.push_back(std::move(entry));
    }
    if (scheme.entries.empty())
        throw ParseError("label scheme lists no entries");
    for (std::size_t i = 0; i < scheme.entries.size(); ++i)
        for (std::size_t j = i + 1; j < scheme.entries.size(); ++j)
            if (scheme.entries[i].code == scheme.entries[j].code)
                throw ParseError("duplicate label code: " +
                                 std::to_string(scheme.entries[i].code));
    scheme.background_code = smallest;
    return scheme;
}

} // namespace segrank::report
