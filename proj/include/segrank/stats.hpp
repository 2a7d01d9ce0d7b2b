#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/ranking.hpp"

namespace segrank::stats {

/// Kendall's tau-b over two equal-length score vectors (typically ranks).
/// nullopt when fewer than two items or when either vector is fully tied.
std::optional<double> kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

struct WilcoxonOptions {
    bool drop_zeros = true;
    std::size_t exact_limit = 12;
};

/// One-sided signed-rank test of H1 "x tends larger than y" on paired
/// samples. Zero differences are dropped by default; ties get midranks.
/// Exact enumeration of all sign patterns up to exact_limit effective
/// pairs, tie-corrected normal approximation with continuity correction
/// beyond. All differences zero gives p = 1.
double wilcoxon_one_sided(const std::vector<double>& x, const std::vector<double>& y,
                          const WilcoxonOptions& options = {});

/// Holm step-down adjustment, input order preserved.
std::vector<double> holm_adjust(const std::vector<double>& p);

enum class HolmFamily { PerRow, Pooled };

struct SignificanceMatrix {
    std::vector<std::string> teams;
    std::vector<std::vector<double>> raw_p;
    std::vector<std::vector<double>> adjusted_p;
    std::vector<std::vector<bool>> superior;
    double alpha = 0.05;
};

/// Per-case team averages backing the pairwise tests and the dot/box plot
/// data: mean over labels of one metric's values for each (team, case).
struct CaseAverages {
    std::vector<std::string> teams;
    std::vector<std::string> cases;
    /// values[team][case]
    std::vector<std::vector<double>> values;
};

CaseAverages case_averages(const rank::Records& records);

/// Pairwise one-sided Wilcoxon tests on per-case mean-over-labels values,
/// oriented by the metric's direction, Holm-adjusted per row (each team's
/// n-1 comparisons) or over the pooled family.
SignificanceMatrix significance_matrix(const rank::Records& records, rank::Metric metric,
                                       double alpha = 0.05,
                                       HolmFamily family = HolmFamily::PerRow);

enum class AgreementWeights { Identity, OrdinalQuadratic };

struct AgreementResult {
    double coefficient = 0.0;
    double pa = 0.0;
    double pe = 0.0;
    std::vector<std::vector<double>> weights;
};

/// Gwet's chance-corrected agreement coefficient. ratings[item][rater]
/// holds category indices in [0, categories). Identity weights give AC1,
/// quadratic ordinal weights give AC2.
AgreementResult gwet_ac(const std::vector<std::vector<int>>& ratings, int categories,
                        AgreementWeights weights = AgreementWeights::OrdinalQuadratic);

/// Middle of the sorted ordinal levels where greater means worse; an even
/// count resolves to the worse of the two middles.
int median_ordinal(std::vector<int> levels);

struct KsResult {
    double d = 0.0;
    double p = 1.0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
};

/// Two-sample Kolmogorov-Smirnov test: exact permutation p when
/// n1 + n2 <= 16, asymptotic Kolmogorov distribution otherwise.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct BootstrapConfig {
    rank::RankScheme scheme{};
    double tie_epsilon = 0.0;
    int b = 1000;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct TauSummary {
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct BootstrapSummary {
    std::vector<std::string> teams;
    std::vector<int> full_ranks;
    int b = 0;
    std::uint64_t seed = 0;
    /// frequency[team][rank-1], relative over b samples.
    std::vector<std::vector<double>> frequency;
    std::vector<double> median_rank;
    std::vector<std::pair<int, int>> interval95;
    std::vector<double> taus;
    TauSummary tau_summary;
};

/// Case-level bootstrap of the full ranking pipeline. Iteration RNG streams
/// derive from (seed, iteration), so any worker count gives identical
/// output.
BootstrapSummary bootstrap_ranking(const rank::MetricRecords& records,
                                   const BootstrapConfig& config);

/// Same resampling over a single metric's ranking.
BootstrapSummary bootstrap_metric_ranking(const rank::Records& records, rank::Metric metric,
                                          const BootstrapConfig& config);

/// Type-7 (linear interpolation) quantile of a sample; q in [0,1].
double quantile_type7(std::vector<double> values, double q);

} // namespace segrank::stats
