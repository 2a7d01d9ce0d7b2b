#include <cstdio>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "segrank/report.hpp"

namespace {

using segrank::report::CommandResult;
using segrank::report::RunConfig;

void add_common_options(CLI::App& cmd, RunConfig& config, std::string& rank_scheme,
                        std::string& units, std::string& scheme_file, std::string& subset) {
    cmd.add_option("--out", config.output_dir, "Output directory")->required();
    cmd.add_option("--manifest", config.manifest_path, "Cohort manifest (CSV or JSON)");
    cmd.add_option("--scheme", scheme_file, "Label scheme CSV (columns code,name)");
    cmd.add_option("--rank-scheme", rank_scheme,
                   "mean, median, rank-then-mean or rank-then-median")
        ->default_val("mean");
    cmd.add_option("--units", units, "Distance units: voxels or mm")->default_val("voxels");
    cmd.add_option("--hd-q", config.hd_percentile, "Hausdorff percentile")
        ->capture_default_str();
    cmd.add_option("--tie-epsilon", config.tie_epsilon, "Aggregate tie tolerance")
        ->capture_default_str();
    cmd.add_option("--alpha", config.alpha, "Significance level")->capture_default_str();
    cmd.add_option("--bootstrap", config.bootstrap_b, "Bootstrap sample count")
        ->capture_default_str();
    cmd.add_option("--seed", config.seed, "Bootstrap seed")->capture_default_str();
    cmd.add_option("--jobs", config.jobs, "Worker threads")->capture_default_str();
    cmd.add_option("--subset", subset, "Restrict to one manifest subset");
    cmd.add_flag("--svg", config.emit_svg, "Also write SVG figures");
}

void add_volume_options(CLI::App& cmd, RunConfig& config) {
    cmd.add_option("--gt", config.gt_dir, "Reference label map directory")->required();
    cmd.add_option("--pred", config.pred_root, "Root of per-team prediction directories")
        ->required();
}

void finish_config(RunConfig& config, const std::string& rank_scheme, const std::string& units,
                   const std::string& scheme_file, const std::string& subset) {
    config.rank_scheme = segrank::report::parse_rank_scheme(rank_scheme);
    config.units = segrank::report::parse_units(units);
    if (!scheme_file.empty())
        config.scheme = segrank::report::load_label_scheme(scheme_file);
    if (!subset.empty())
        config.subset = subset;
    config.validate();
}

void print_result(const CommandResult& result) {
    for (const auto& warning : result.warnings)
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    for (const auto& file : result.files)
        std::printf("%s\n", file.string().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-class segmentation evaluation and ranking toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI file");

    struct Sub {
        CLI::App* cmd;
        bool needs_volumes;
        std::function<CommandResult(const RunConfig&)> run;
    };
    std::vector<Sub> subs{
        {app.add_subcommand("evaluate", "Compute per-case per-label metrics"), true,
         segrank::report::cmd_evaluate},
        {app.add_subcommand("rank", "Rank teams from an existing metrics table"), false,
         segrank::report::cmd_rank},
        {app.add_subcommand("stats", "Significance tests and bootstrap stability"), false,
         segrank::report::cmd_stats},
        {app.add_subcommand("agreement", "Inter-rater agreement over quality ratings"), false,
         segrank::report::cmd_agreement},
        {app.add_subcommand("icv", "Intracranial volume comparison"), true,
         segrank::report::cmd_icv},
        {app.add_subcommand("report", "Plot data and the checksummed file index"), false,
         segrank::report::cmd_report},
        {app.add_subcommand("all", "Full pipeline: evaluate, rank, stats, report"), true,
         segrank::report::run_all},
    };

    RunConfig config;
    std::string rank_scheme, units, scheme_file, subset;
    for (auto& sub : subs) {
        add_common_options(*sub.cmd, config, rank_scheme, units, scheme_file, subset);
        if (sub.needs_volumes)
            add_volume_options(*sub.cmd, config);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        finish_config(config, rank_scheme, units, scheme_file, subset);
        for (const auto& sub : subs)
            if (sub.cmd->parsed()) {
                print_result(sub.run(config));
                return 0;
            }
        return 2;
    } catch (const segrank::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}
