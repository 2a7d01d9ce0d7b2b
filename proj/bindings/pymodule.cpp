#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "segrank/mask.hpp"
#include "segrank/metrics.hpp"
#include "segrank/nifti.hpp"
#include "segrank/ranking.hpp"
#include "segrank/report.hpp"
#include "segrank/stats.hpp"

namespace py = pybind11;
using namespace segrank;

namespace {

/// Accepts any integral 3D array in C (z, y, x) order; the volume stores
/// x-fastest, so the numpy strides map straight onto it reversed.
io::LabelVolume volume_from_array(const py::array& labels,
                                  const std::array<double, 3>& spacing) {
    const auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(
        labels);
    if (!arr || arr.ndim() != 3)
        throw Error("expected a 3-dimensional integer label array");
    io::LabelVolume volume;
    volume.dims = {static_cast<std::int32_t>(arr.shape(2)),
                   static_cast<std::int32_t>(arr.shape(1)),
                   static_cast<std::int32_t>(arr.shape(0))};
    volume.spacing = spacing;
    volume.voxels.assign(arr.data(), arr.data() + arr.size());
    return volume;
}

py::array_t<std::uint8_t> volume_to_array(const io::LabelVolume& volume) {
    py::array_t<std::uint8_t> arr(
        {static_cast<py::ssize_t>(volume.dims[2]), static_cast<py::ssize_t>(volume.dims[1]),
         static_cast<py::ssize_t>(volume.dims[0])});
    std::copy(volume.voxels.begin(), volume.voxels.end(), arr.mutable_data());
    return arr;
}

metrics::BinaryMask mask_from_array(const py::array& values) {
    const auto arr =
        py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(values);
    if (!arr || arr.ndim() != 3)
        throw Error("expected a 3-dimensional array");
    metrics::BinaryMask mask;
    mask.dims = {static_cast<std::int32_t>(arr.shape(2)),
                 static_cast<std::int32_t>(arr.shape(1)),
                 static_cast<std::int32_t>(arr.shape(0))};
    mask.bits.assign(arr.data(), arr.data() + arr.size());
    for (auto& bit : mask.bits)
        bit = bit ? 1 : 0;
    return mask;
}

py::dict cell_to_python(const metrics::MetricCell& cell) {
    py::dict out;
    out["state"] = metrics::cell_text(cell);
    out["value"] = cell.has_value() ? py::object(py::float_(cell.value)) : py::none();
    return out;
}

py::list evaluate_arrays(const py::array& gt, const py::array& pred,
                         const std::array<double, 3>& spacing, const std::string& units,
                         double hd_q) {
    const auto gv = volume_from_array(gt, spacing);
    const auto pv = volume_from_array(pred, spacing);
    metrics::EvalOptions options;
    options.units = report::parse_units(units);
    options.hd_q = hd_q;
    py::list rows;
    for (const auto& label :
         metrics::evaluate_case(gv, pv, io::LabelScheme::fetal_tissue_default(), options)) {
        py::dict row;
        row["label_code"] = label.label_code;
        row["label_name"] = label.label_name;
        row["dsc"] = cell_to_python(label.dsc);
        row["vs"] = cell_to_python(label.vs);
        row["hd"] = cell_to_python(label.hd);
        row["hd95"] = cell_to_python(label.hd95);
        rows.append(std::move(row));
    }
    return rows;
}

rank::Records records_from_python(const py::iterable& rows) {
    rank::Records records;
    for (py::handle item : rows) {
        const auto entry = item.cast<py::tuple>();
        if (entry.size() != 4)
            throw Error("records need (team, case_id, label_code, value) tuples");
        rank::Record record{entry[0].cast<std::string>(), entry[1].cast<std::string>(),
                            entry[2].cast<int>(), std::nullopt};
        if (!entry[3].is_none())
            record.value = entry[3].cast<double>();
        records.push_back(std::move(record));
    }
    return records;
}

rank::Metric metric_from_name(const std::string& name) {
    if (name == "dsc")
        return rank::Metric::DSC;
    if (name == "hd95")
        return rank::Metric::HD95;
    if (name == "vs")
        return rank::Metric::VS;
    throw Error("unknown metric: " + name + " (use dsc, hd95 or vs)");
}

py::list table_to_python(const rank::RankingTable& table) {
    py::list rows;
    for (const auto& row : table.rows) {
        py::dict item;
        item["team"] = row.team;
        item["aggregate"] = row.aggregate;
        item["rank"] = row.rank;
        rows.append(std::move(item));
    }
    return rows;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-class segmentation evaluation and ranking toolkit";

    py::register_exception<Error>(m, "SegrankError");

    m.def(
        "dsc",
        [](const py::array& a, const py::array& b) {
            return metrics::dsc(mask_from_array(a), mask_from_array(b));
        },
        py::arg("gt"), py::arg("pred"), "Dice similarity of two binary masks");
    m.def(
        "volume_similarity",
        [](const py::array& a, const py::array& b) {
            return metrics::volume_similarity(mask_from_array(a), mask_from_array(b));
        },
        py::arg("gt"), py::arg("pred"));
    m.def(
        "hausdorff",
        [](const py::array& a, const py::array& b) {
            return metrics::hausdorff(mask_from_array(a), mask_from_array(b));
        },
        py::arg("gt"), py::arg("pred"), "Symmetric Hausdorff distance in voxel units");
    m.def(
        "hausdorff_percentile",
        [](const py::array& a, const py::array& b, double q) {
            return metrics::hausdorff_percentile(mask_from_array(a), mask_from_array(b), q);
        },
        py::arg("gt"), py::arg("pred"), py::arg("q") = 95.0);

    m.def("evaluate_case", &evaluate_arrays, py::arg("gt"), py::arg("pred"),
          py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
          py::arg("units") = "voxels", py::arg("hd_q") = 95.0,
          "Per-label DSC/VS/HD/HD95 for a reference and a prediction label array");

    m.def(
        "read_nifti",
        [](const std::filesystem::path& path) {
            const auto volume = io::read_nifti(path);
            return py::make_tuple(volume_to_array(volume), volume.spacing);
        },
        py::arg("path"), "Load a label map; returns (zyx array, spacing)");
    m.def(
        "write_nifti",
        [](const py::array& labels, const std::filesystem::path& path,
           const std::array<double, 3>& spacing) {
            io::write_nifti(volume_from_array(labels, spacing), path);
        },
        py::arg("labels"), py::arg("path"),
        py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0});

    m.def(
        "metric_ranking",
        [](const py::iterable& rows, const std::string& metric, const std::string& scheme,
           double tie_epsilon) {
            return table_to_python(rank::metric_ranking(records_from_python(rows),
                                                        metric_from_name(metric),
                                                        report::parse_rank_scheme(scheme),
                                                        tie_epsilon));
        },
        py::arg("records"), py::arg("metric"), py::arg("scheme") = "mean",
        py::arg("tie_epsilon") = 0.0,
        "Rank teams from (team, case_id, label_code, value) records; value None = missing");
    m.def(
        "challenge_ranking",
        [](const py::iterable& dsc, const py::iterable& hd95, const py::iterable& vs,
           const std::string& scheme, double tie_epsilon) {
            rank::MetricRecords records{records_from_python(dsc), records_from_python(hd95),
                                        records_from_python(vs)};
            const auto result = rank::challenge_ranking(
                records, report::parse_rank_scheme(scheme), tie_epsilon);
            py::dict out;
            out["dsc"] = table_to_python(result.dsc);
            out["hd95"] = table_to_python(result.hd95);
            out["vs"] = table_to_python(result.vs);
            out["combined"] = table_to_python(result.combined);
            return out;
        },
        py::arg("dsc"), py::arg("hd95"), py::arg("vs"), py::arg("scheme") = "mean",
        py::arg("tie_epsilon") = 0.0,
        "Per-metric tables plus the combined mean-rank table");

    m.def(
        "kendall_tau",
        [](const std::vector<double>& x, const std::vector<double>& y) -> py::object {
            const auto tau = stats::kendall_tau(x, y);
            return tau ? py::object(py::float_(*tau)) : py::none();
        },
        py::arg("x"), py::arg("y"), "Tie-corrected rank correlation; None when undefined");
    m.def(
        "wilcoxon_one_sided",
        [](const std::vector<double>& x, const std::vector<double>& y, bool drop_zeros,
           std::size_t exact_limit) {
            stats::WilcoxonOptions options;
            options.drop_zeros = drop_zeros;
            options.exact_limit = exact_limit;
            return stats::wilcoxon_one_sided(x, y, options);
        },
        py::arg("x"), py::arg("y"), py::arg("drop_zeros") = true,
        py::arg("exact_limit") = 12,
        "One-sided paired signed-rank p-value for x stochastically above y");
    m.def("holm_adjust", &stats::holm_adjust, py::arg("p_values"),
          "Step-down familywise error adjustment");
    m.def(
        "gwet_ac",
        [](const std::vector<std::vector<int>>& ratings, int categories,
           const std::string& weights) {
            stats::AgreementWeights w;
            if (weights == "identity")
                w = stats::AgreementWeights::Identity;
            else if (weights == "ordinal")
                w = stats::AgreementWeights::OrdinalQuadratic;
            else
                throw Error("unknown weights: " + weights + " (use identity or ordinal)");
            const auto result = stats::gwet_ac(ratings, categories, w);
            py::dict out;
            out["coefficient"] = result.coefficient;
            out["pa"] = result.pa;
            out["pe"] = result.pe;
            return out;
        },
        py::arg("ratings"), py::arg("categories"), py::arg("weights") = "ordinal",
        "Chance-corrected agreement over an item x rater matrix");
    m.def(
        "bootstrap_ranking",
        [](const py::iterable& dsc, const py::iterable& hd95, const py::iterable& vs, int b,
           std::uint64_t seed, int jobs, const std::string& scheme) {
            rank::MetricRecords records{records_from_python(dsc), records_from_python(hd95),
                                        records_from_python(vs)};
            stats::BootstrapConfig config;
            config.scheme = report::parse_rank_scheme(scheme);
            config.b = b;
            config.seed = seed;
            config.jobs = jobs;
            const auto summary = stats::bootstrap_ranking(records, config);
            py::dict out;
            out["teams"] = summary.teams;
            out["full_ranks"] = summary.full_ranks;
            out["frequency"] = summary.frequency;
            out["median_rank"] = summary.median_rank;
            out["interval95"] = summary.interval95;
            out["taus"] = summary.taus;
            py::dict tau;
            tau["mean"] = summary.tau_summary.mean;
            tau["median"] = summary.tau_summary.median;
            tau["q25"] = summary.tau_summary.q25;
            tau["q75"] = summary.tau_summary.q75;
            out["tau_summary"] = std::move(tau);
            return out;
        },
        py::arg("dsc"), py::arg("hd95"), py::arg("vs"), py::arg("b") = 1000,
        py::arg("seed") = 0, py::arg("jobs") = 1, py::arg("scheme") = "mean",
        "Case-resampled ranking stability for the combined rank");

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& gt_dir, const std::filesystem::path& pred_root,
           const std::filesystem::path& output_dir,
           const std::optional<std::filesystem::path>& manifest, int bootstrap_b,
           std::uint64_t seed, int jobs) {
            report::RunConfig config;
            config.gt_dir = gt_dir;
            config.pred_root = pred_root;
            config.output_dir = output_dir;
            if (manifest)
                config.manifest_path = *manifest;
            config.bootstrap_b = bootstrap_b;
            config.seed = seed;
            config.jobs = jobs;
            const auto result = report::run_all(config);
            py::dict out;
            py::list files;
            for (const auto& file : result.files)
                files.append(file.string());
            out["files"] = std::move(files);
            out["warnings"] = result.warnings;
            return out;
        },
        py::arg("gt_dir"), py::arg("pred_root"), py::arg("output_dir"),
        py::arg("manifest") = py::none(), py::arg("bootstrap_b") = 1000,
        py::arg("seed") = 0, py::arg("jobs") = 1,
        "Full evaluate/rank/stats/report pipeline over directories of label maps");
}
