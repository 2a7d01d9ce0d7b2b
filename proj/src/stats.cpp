#include "segrank/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <thread>

namespace segrank::stats {

std::optional<double> kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw Error("kendall_tau needs equal-length inputs");
    const std::size_t n = a.size();
    if (n < 2)
        return std::nullopt;
    std::int64_t concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0)
                continue;
            if (da == 0.0)
                ++ties_a;
            else if (db == 0.0)
                ++ties_b;
            else if ((da > 0.0) == (db > 0.0))
                ++concordant;
            else
                ++discordant;
        }
    const double cd = static_cast<double>(concordant + discordant);
    const double denom = std::sqrt((cd + static_cast<double>(ties_a)) *
                                   (cd + static_cast<double>(ties_b)));
    if (denom == 0.0)
        return std::nullopt;
    return static_cast<double>(concordant - discordant) / denom;
}

namespace {

/// Midranks of absolute differences, plus the tie-correction term
/// sum(t^3 - t) over tie groups.
std::pair<std::vector<double>, double> midranks(const std::vector<double>& abs_d) {
    const std::size_t n = abs_d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return abs_d[i] < abs_d[j]; });
    std::vector<double> ranks(n, 0.0);
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && abs_d[order[j]] == abs_d[order[i]])
            ++j;
        const double shared = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            ranks[order[k]] = shared;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    return {ranks, tie_term};
}

} // namespace

double wilcoxon_one_sided(const std::vector<double>& x, const std::vector<double>& y,
                          const WilcoxonOptions& options) {
    if (x.size() != y.size())
        throw Error("wilcoxon_one_sided needs paired samples");
    if (x.empty())
        throw EmptySample("wilcoxon_one_sided on empty samples");
    std::vector<double> diffs;
    diffs.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0 || !options.drop_zeros)
            diffs.push_back(d);
    }
    if (diffs.empty())
        return 1.0;
    std::vector<double> abs_d;
    abs_d.reserve(diffs.size());
    for (double d : diffs)
        abs_d.push_back(std::abs(d));
    const std::vector<double> ranks = midranks(abs_d).first;

    // Zeros kept (Pratt variant) share the lowest ranks but carry no sign,
    // so only nonzero differences contribute to the statistic and to the
    // sign enumeration.
    std::vector<double> signed_ranks;
    double w_plus = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (diffs[i] == 0.0)
            continue;
        signed_ranks.push_back(ranks[i]);
        if (diffs[i] > 0.0)
            w_plus += ranks[i];
    }
    const std::size_t n_eff = signed_ranks.size();
    if (n_eff == 0)
        return 1.0;

    if (n_eff <= options.exact_limit) {
        const std::uint64_t patterns = std::uint64_t{1} << n_eff;
        std::uint64_t at_least = 0;
        for (std::uint64_t mask = 0; mask < patterns; ++mask) {
            double w = 0.0;
            for (std::size_t i = 0; i < n_eff; ++i)
                if (mask & (std::uint64_t{1} << i))
                    w += signed_ranks[i];
            if (w >= w_plus)
                ++at_least;
        }
        return static_cast<double>(at_least) / static_cast<double>(patterns);
    }

    std::vector<double> abs_nonzero;
    for (double d : diffs)
        if (d != 0.0)
            abs_nonzero.push_back(std::abs(d));
    const double tie_term = midranks(abs_nonzero).second;
    const double dn = static_cast<double>(diffs.size());
    const double d0 = dn - static_cast<double>(n_eff);
    const double mean = (dn * (dn + 1.0) - d0 * (d0 + 1.0)) / 4.0;
    const double variance = (dn * (dn + 1.0) * (2.0 * dn + 1.0) -
                             d0 * (d0 + 1.0) * (2.0 * d0 + 1.0)) /
                                24.0 -
                            tie_term / 48.0;
    if (variance <= 0.0)
        return w_plus > mean ? 0.0 : 1.0;
    const double z = (w_plus - mean - 0.5) / std::sqrt(variance);
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

std::vector<double> holm_adjust(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double scaled = p[order[k]] * static_cast<double>(m - k);
        running = std::max(running, scaled);
        adjusted[order[k]] = std::min(1.0, running);
    }
    return adjusted;
}

CaseAverages case_averages(const rank::Records& records) {
    std::map<std::string, std::map<std::string, std::pair<double, int>>> sums;
    for (const auto& r : records) {
        if (!r.value)
            throw NoCases("missing value in case averaging; substitute first");
        auto& cell = sums[r.team][r.case_id];
        cell.first += *r.value;
        cell.second += 1;
    }
    if (sums.empty())
        throw NoCases("no records to average");
    // Keep the cases every team covers so the tests stay paired.
    std::map<std::string, int> case_cover;
    for (const auto& [team, cases] : sums)
        for (const auto& [case_id, cell] : cases)
            ++case_cover[case_id];
    CaseAverages out;
    for (const auto& [team, cases] : sums)
        out.teams.push_back(team);
    for (const auto& [case_id, cover] : case_cover)
        if (cover == static_cast<int>(out.teams.size()))
            out.cases.push_back(case_id);
    if (out.cases.empty())
        throw NoCases("no case is covered by every team");
    for (const auto& team : out.teams) {
        std::vector<double> row;
        row.reserve(out.cases.size());
        for (const auto& case_id : out.cases) {
            const auto& cell = sums.at(team).at(case_id);
            row.push_back(cell.first / static_cast<double>(cell.second));
        }
        out.values.push_back(std::move(row));
    }
    return out;
}

SignificanceMatrix significance_matrix(const rank::Records& records, rank::Metric metric,
                                       double alpha, HolmFamily family) {
    const auto averages = case_averages(rank::substitute_missing(records, metric));
    const std::size_t n = averages.teams.size();
    SignificanceMatrix matrix;
    matrix.teams = averages.teams;
    matrix.alpha = alpha;
    matrix.raw_p.assign(n, std::vector<double>(n, 1.0));
    matrix.adjusted_p.assign(n, std::vector<double>(n, 1.0));
    matrix.superior.assign(n, std::vector<bool>(n, false));

    const bool lower_better = rank::direction_of(metric) == rank::Direction::LowerBetter;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            std::vector<double> xi = averages.values[i];
            std::vector<double> yj = averages.values[j];
            if (lower_better)
                for (std::size_t c = 0; c < xi.size(); ++c) {
                    xi[c] = -xi[c];
                    yj[c] = -yj[c];
                }
            matrix.raw_p[i][j] = wilcoxon_one_sided(xi, yj);
        }

    if (family == HolmFamily::PerRow) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    row.push_back(matrix.raw_p[i][j]);
            auto adjusted = holm_adjust(row);
            std::size_t k = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    matrix.adjusted_p[i][j] = adjusted[k++];
        }
    } else {
        std::vector<double> pooled;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    pooled.push_back(matrix.raw_p[i][j]);
        auto adjusted = holm_adjust(pooled);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (j != i)
                    matrix.adjusted_p[i][j] = adjusted[k++];
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            matrix.superior[i][j] = i != j && matrix.adjusted_p[i][j] <= alpha;
    return matrix;
}

AgreementResult gwet_ac(const std::vector<std::vector<int>>& ratings, int categories,
                        AgreementWeights weights) {
    if (ratings.empty())
        throw EmptySample("agreement needs at least one rated item");
    if (categories < 2)
        throw DegenerateCategories("agreement needs at least two declared categories");
    const auto q = static_cast<std::size_t>(categories);
    for (const auto& row : ratings) {
        if (row.size() < 2)
            throw EmptySample("agreement needs at least two raters per item");
        for (int c : row)
            if (c < 0 || c >= categories)
                throw SchemaError("rating category out of range: " + std::to_string(c));
    }

    AgreementResult result;
    result.weights.assign(q, std::vector<double>(q, 0.0));
    for (std::size_t k = 0; k < q; ++k)
        for (std::size_t l = 0; l < q; ++l) {
            if (weights == AgreementWeights::Identity) {
                result.weights[k][l] = k == l ? 1.0 : 0.0;
            } else {
                const double gap = static_cast<double>(k) - static_cast<double>(l);
                const double span = static_cast<double>(q - 1);
                result.weights[k][l] = 1.0 - gap * gap / (span * span);
            }
        }

    const double n_items = static_cast<double>(ratings.size());
    std::vector<double> pi(q, 0.0);
    double pa = 0.0;
    for (const auto& row : ratings) {
        const double r = static_cast<double>(row.size());
        std::vector<double> counts(q, 0.0);
        for (int c : row)
            counts[static_cast<std::size_t>(c)] += 1.0;
        for (std::size_t k = 0; k < q; ++k)
            pi[k] += counts[k] / r / n_items;
        double item_pa = 0.0;
        for (std::size_t k = 0; k < q; ++k) {
            double weighted = 0.0;
            for (std::size_t l = 0; l < q; ++l)
                weighted += result.weights[k][l] * counts[l];
            item_pa += counts[k] * (weighted - 1.0);
        }
        pa += item_pa / (r * (r - 1.0)) / n_items;
    }

    double total_weight = 0.0;
    for (const auto& row : result.weights)
        for (double w : row)
            total_weight += w;
    double spread = 0.0;
    for (std::size_t k = 0; k < q; ++k)
        spread += pi[k] * (1.0 - pi[k]);
    result.pa = pa;
    result.pe = total_weight * spread /
                (static_cast<double>(q) * static_cast<double>(q - 1));
    if (result.pe >= 1.0)
        throw DegenerateCategories("chance agreement saturates; coefficient undefined");
    result.coefficient = (result.pa - result.pe) / (1.0 - result.pe);
    return result;
}

int median_ordinal(std::vector<int> levels) {
    if (levels.empty())
        throw EmptySample("median of no ratings");
    std::sort(levels.begin(), levels.end());
    return levels[levels.size() / 2];
}

namespace {

/// sup |ECDF_a - ECDF_b| over a sorted pooled sample; in_a flags each
/// pooled element's sample. Tied values advance both counters first.
double ks_statistic(const std::vector<double>& pooled, const std::vector<bool>& in_a,
                    std::size_t n1, std::size_t n2) {
    double d = 0.0;
    std::size_t i = 0, ca = 0, cb = 0;
    const std::size_t n = pooled.size();
    while (i < n) {
        const double v = pooled[i];
        while (i < n && pooled[i] == v) {
            if (in_a[i])
                ++ca;
            else
                ++cb;
            ++i;
        }
        const double diff = std::abs(static_cast<double>(ca) / static_cast<double>(n1) -
                                     static_cast<double>(cb) / static_cast<double>(n2));
        d = std::max(d, diff);
    }
    return d;
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-8)
        return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-12)
            break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw EmptySample("two-sample test needs two non-empty samples");
    KsResult result;
    result.n1 = a.size();
    result.n2 = b.size();

    std::vector<std::pair<double, bool>> tagged;
    tagged.reserve(a.size() + b.size());
    for (double v : a)
        tagged.emplace_back(v, true);
    for (double v : b)
        tagged.emplace_back(v, false);
    std::sort(tagged.begin(), tagged.end());
    std::vector<double> pooled;
    std::vector<bool> in_a;
    for (const auto& [v, is_a] : tagged) {
        pooled.push_back(v);
        in_a.push_back(is_a);
    }
    result.d = ks_statistic(pooled, in_a, result.n1, result.n2);

    const std::size_t n = pooled.size();
    if (n <= 16) {
        // Exact permutation distribution: every assignment of pooled slots
        // to sample a is equally likely under the null.
        std::uint64_t total = 0, at_least = 0;
        const std::uint64_t masks = std::uint64_t{1} << n;
        for (std::uint64_t mask = 0; mask < masks; ++mask) {
            if (static_cast<std::size_t>(__builtin_popcountll(mask)) != result.n1)
                continue;
            ++total;
            std::vector<bool> flags(n, false);
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (std::uint64_t{1} << i))
                    flags[i] = true;
            if (ks_statistic(pooled, flags, result.n1, result.n2) >= result.d - 1e-12)
                ++at_least;
        }
        result.p = static_cast<double>(at_least) / static_cast<double>(total);
    } else {
        const double ne = static_cast<double>(result.n1) * static_cast<double>(result.n2) /
                          static_cast<double>(result.n1 + result.n2);
        result.p = kolmogorov_q(std::sqrt(ne) * result.d);
    }
    return result;
}

double quantile_type7(std::vector<double> values, double q) {
    if (values.empty())
        throw EmptySample("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size())
        return values.back();
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t iteration) {
    return mix64(seed + 0x9E3779B97F4A7C15ull * (iteration + 1));
}

/// Unbiased bounded draw via rejection, identical on every platform.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t all = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = all - all % n;
    std::uint64_t x = rng();
    while (x >= limit)
        x = rng();
    return x % n;
}

struct CaseSlice {
    rank::Records dsc;
    rank::Records hd95;
    rank::Records vs;
};

using TableFn = std::function<rank::RankingTable(const rank::MetricRecords&)>;

BootstrapSummary bootstrap_core(const rank::MetricRecords& records, const TableFn& make_table,
                                const BootstrapConfig& config) {
    if (config.b < 1)
        throw Error("bootstrap needs b >= 1");
    std::set<std::string> case_set;
    for (const auto& r : records.dsc)
        case_set.insert(r.case_id);
    for (const auto& r : records.hd95)
        case_set.insert(r.case_id);
    for (const auto& r : records.vs)
        case_set.insert(r.case_id);
    if (case_set.empty())
        throw NoCases("bootstrap needs at least one case");
    const std::vector<std::string> cases(case_set.begin(), case_set.end());

    std::map<std::string, CaseSlice> slices;
    for (const auto& r : records.dsc)
        slices[r.case_id].dsc.push_back(r);
    for (const auto& r : records.hd95)
        slices[r.case_id].hd95.push_back(r);
    for (const auto& r : records.vs)
        slices[r.case_id].vs.push_back(r);

    const auto full = make_table(records);
    BootstrapSummary summary;
    for (const auto& row : full.rows)
        summary.teams.push_back(row.team);
    std::sort(summary.teams.begin(), summary.teams.end());
    summary.full_ranks.reserve(summary.teams.size());
    for (const auto& team : summary.teams)
        summary.full_ranks.push_back(full.rank_of(team));
    summary.b = config.b;
    summary.seed = config.seed;

    const std::size_t n_teams = summary.teams.size();
    const std::size_t n_cases = cases.size();
    std::vector<std::vector<int>> sample_ranks(static_cast<std::size_t>(config.b));
    std::vector<double> taus(static_cast<std::size_t>(config.b),
                             std::numeric_limits<double>::quiet_NaN());

    std::vector<double> full_rank_values;
    full_rank_values.reserve(n_teams);
    for (int r : summary.full_ranks)
        full_rank_values.push_back(static_cast<double>(r));

    auto run_iteration = [&](std::size_t iteration) {
        std::mt19937_64 rng(iteration_seed(config.seed, iteration));
        rank::MetricRecords resample;
        for (std::size_t k = 0; k < n_cases; ++k) {
            const auto& slice = slices.at(cases[bounded_draw(rng, n_cases)]);
            const std::string alias = "#" + std::to_string(k);
            for (auto r : slice.dsc) {
                r.case_id += alias;
                resample.dsc.push_back(std::move(r));
            }
            for (auto r : slice.hd95) {
                r.case_id += alias;
                resample.hd95.push_back(std::move(r));
            }
            for (auto r : slice.vs) {
                r.case_id += alias;
                resample.vs.push_back(std::move(r));
            }
        }
        const auto table = make_table(resample);
        std::vector<int> ranks(n_teams, 0);
        std::vector<double> rank_values(n_teams, 0.0);
        for (std::size_t t = 0; t < n_teams; ++t) {
            ranks[t] = table.rank_of(summary.teams[t]);
            rank_values[t] = static_cast<double>(ranks[t]);
        }
        sample_ranks[iteration] = std::move(ranks);
        if (auto tau = kendall_tau(rank_values, full_rank_values))
            taus[iteration] = *tau;
    };

    const int workers = std::max(1, std::min(config.jobs, config.b));
    if (workers == 1) {
        for (std::size_t i = 0; i < static_cast<std::size_t>(config.b); ++i)
            run_iteration(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= static_cast<std::size_t>(config.b))
                        return;
                    run_iteration(i);
                }
            });
        for (auto& t : pool)
            t.join();
    }

    summary.frequency.assign(n_teams, std::vector<double>(n_teams, 0.0));
    summary.median_rank.resize(n_teams);
    summary.interval95.resize(n_teams);
    for (std::size_t t = 0; t < n_teams; ++t) {
        std::vector<int> ranks;
        ranks.reserve(static_cast<std::size_t>(config.b));
        std::vector<std::int64_t> hits(n_teams, 0);
        for (const auto& sample : sample_ranks) {
            ranks.push_back(sample[t]);
            ++hits[static_cast<std::size_t>(sample[t] - 1)];
        }
        for (std::size_t r = 0; r < n_teams; ++r)
            summary.frequency[t][r] =
                static_cast<double>(hits[r]) / static_cast<double>(config.b);
        std::sort(ranks.begin(), ranks.end());
        const std::size_t nb = ranks.size();
        summary.median_rank[t] =
            nb % 2 ? static_cast<double>(ranks[nb / 2])
                   : (static_cast<double>(ranks[nb / 2 - 1]) + static_cast<double>(ranks[nb / 2])) /
                         2.0;
        auto nearest = [&](double q) {
            auto k = static_cast<std::size_t>(
                std::ceil(q * static_cast<double>(nb) / 100.0 - 1e-9));
            k = std::clamp<std::size_t>(k, 1, nb);
            return ranks[k - 1];
        };
        summary.interval95[t] = {nearest(2.5), nearest(97.5)};
    }

    summary.taus = std::move(taus);
    std::vector<double> defined;
    for (double t : summary.taus)
        if (!std::isnan(t))
            defined.push_back(t);
    if (!defined.empty()) {
        double sum = 0.0;
        for (double t : defined)
            sum += t;
        summary.tau_summary.mean = sum / static_cast<double>(defined.size());
        summary.tau_summary.median = quantile_type7(defined, 0.5);
        summary.tau_summary.q25 = quantile_type7(defined, 0.25);
        summary.tau_summary.q75 = quantile_type7(defined, 0.75);
    }
    return summary;
}

} // namespace

BootstrapSummary bootstrap_ranking(const rank::MetricRecords& records,
                                   const BootstrapConfig& config) {
    return bootstrap_core(records,
                          [&](const rank::MetricRecords& sample) {
                              return rank::challenge_ranking(sample, config.scheme,
                                                             config.tie_epsilon)
                                  .combined;
                          },
                          config);
}

BootstrapSummary bootstrap_metric_ranking(const rank::Records& records, rank::Metric metric,
                                          const BootstrapConfig& config) {
    rank::MetricRecords slot;
    slot.dsc = records;
    return bootstrap_core(slot,
                          [&](const rank::MetricRecords& sample) {
                              return rank::metric_ranking(sample.dsc, metric, config.scheme,
                                                          config.tie_epsilon);
                          },
                          config);
}

} // namespace segrank::stats
