#include "coalsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coalsim/rng.hpp"

namespace coalsim {

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw std::invalid_argument("KS statistic needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto R = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double F = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / R - F, F - static_cast<double>(i) / R});
    }
    return std::clamp(d, 0.0, 1.0);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double ks_null_quantile(std::size_t R, double q, std::size_t trials, std::uint64_t seed) {
    if (R == 0 || trials == 0) throw std::invalid_argument("calibration needs R >= 1 and trials >= 1");
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
    std::vector<double> stats(trials);
    std::vector<double> u(R);
    const auto identity = [](double x) { return x; };
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng(derive_seed(seed, 0x4B53, i));
        for (auto& v : u) v = rng.uniform01();
        stats[i] = ks_statistic(u, identity);
    }
    return quantile(std::move(stats), q);
}

namespace {

double correlation(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

HoldingTimeTest holding_impl(std::span<const PathStatistics> paths, std::size_t n, std::optional<double> rate) {
    if (n < 2) throw std::invalid_argument("holding-time test needs n >= 2");
    if (paths.size() < kMinTestReplicates) throw std::invalid_argument("too few replicates for a holding-time test");
    auto sojourn = [](const PathStatistics& s, std::size_t k) -> std::optional<double> {
        if (k >= s.level_sojourns.size()) return std::nullopt;
        const auto& v = s.level_sojourns[k];
        if (!v || *v <= 0.0) return std::nullopt;
        return v;
    };
    HoldingTimeTest out;
    for (std::size_t k = n; k >= 2; --k) {
        std::vector<double> x;
        for (const auto& s : paths)
            if (auto v = sojourn(s, k)) x.push_back(*v);
        LevelTest level{k, rate.value_or(pair_count(k)), x.size(), 1.0};
        if (x.size() >= kMinTestReplicates)
            level.ks = ks_statistic(x, [r = level.rate](double t) { return theoretical_cdf(CdfKind::exponential, r, 1, t); });
        out.levels.push_back(level);
    }
    for (std::size_t k = n; k >= 3; --k) {
        std::vector<double> a, b;
        for (const auto& s : paths) {
            auto u = sojourn(s, k);
            auto v = sojourn(s, k - 1);
            if (u && v) {
                a.push_back(*u);
                b.push_back(*v);
            }
        }
        out.consecutive_correlation.push_back(correlation(a, b));
    }
    return out;
}

template <typename Path>
MergerFraction merger_fraction_impl(std::span<const Path> paths) {
    MergerFraction f;
    for (const auto& path : paths) {
        Partition prev = Partition::singletons(path.n);
        for (const auto& e : path.events) {
            ++f.events;
            if (is_multiple_merger(prev, e.partition)) ++f.multiple;
            prev = e.partition;
        }
    }
    if (f.events == 0) throw std::invalid_argument("no merger events in the given paths");
    return f;
}

double fdd_impl(const std::vector<std::optional<Partition>>& states, std::size_t n, double t,
                             const std::vector<Partition>& all) {
    std::vector<double> counts(all.size(), 0.0);
    double used = 0.0;
    for (const auto& s : states) {
        if (!s) continue;
        auto it = std::lower_bound(all.begin(), all.end(), *s);
        counts[static_cast<std::size_t>(it - all.begin())] += 1.0;
        used += 1.0;
    }
    if (used < static_cast<double>(kMinFddReplicates))
        throw std::invalid_argument("too few replicates observed at time " + format_real(t));
    const auto exact = kingman_marginal(n, t);
    double tv = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) tv += std::fabs(counts[i] / used - exact[i]);
    return 0.5 * tv;
}

}  // namespace

HoldingTimeTest holding_time_test(std::span<const PathStatistics> paths, std::size_t n) {
    return holding_impl(paths, n, std::nullopt);
}

HoldingTimeTest holding_time_test(std::span<const PathStatistics> paths, std::size_t n, double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("rate must be positive");
    return holding_impl(paths, n, rate);
}

JumpTimeTest jump_time_test(std::span<const std::vector<double>> counter_jumps, std::size_t n, unsigned m) {
    if (m == 0) throw std::invalid_argument("jump index m must be at least 1");
    if (n < 2) throw std::invalid_argument("jump-time test needs n >= 2");
    std::vector<double> x;
    for (const auto& jumps : counter_jumps)
        if (jumps.size() >= m) x.push_back(jumps[m - 1]);
    if (x.size() < kMinTestReplicates) throw std::invalid_argument("too few replicates for a jump-time test");
    const double alpha = pair_count(n);
    return {m, x.size(), ks_statistic(x, [alpha, m](double t) { return theoretical_cdf(CdfKind::erlang, alpha, m, t); })};
}

bool is_multiple_merger(const Partition& before, const Partition& after) {
    const auto profile = merge_profile(before, after);
    if (!profile) throw std::invalid_argument("consecutive path states do not coarsen");
    std::size_t merged_blocks = 0;
    for (auto b : profile->counts) {
        if (b >= 3) return true;
        if (b == 2) ++merged_blocks;
    }
    return merged_blocks >= 2;
}

MergerFraction multiple_merger_fraction(std::span<const GenealogyPath> paths) { return merger_fraction_impl(paths); }
MergerFraction multiple_merger_fraction(std::span<const CoalescentPath> paths) { return merger_fraction_impl(paths); }

MeanEstimate mean_estimate(std::span<const double> values) {
    if (values.empty()) return {};
    long double sum = 0.0L;
    for (double v : values) sum += v;
    const long double mean = sum / values.size();
    if (values.size() < 2) return {static_cast<double>(mean), 0.0};
    long double ss = 0.0L;
    for (double v : values) ss += (v - mean) * (v - mean);
    const long double var = ss / (values.size() - 1);
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(var / values.size()))};
}

bool strictly_decreasing(std::span<const double> values) {
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] < values[i - 1])) return false;
    return true;
}

AsymptoticDiagnostics asymptotic_diagnostics(std::span<const std::size_t> N_grid,
                                             std::span<const std::vector<ReplicateResult>> runs) {
    if (N_grid.size() != runs.size()) throw std::invalid_argument("one replicate set per population size required");
    AsymptoticDiagnostics out;
    std::vector<double> c_tau, sum_c2, sum_d;
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
        AsymptoticRow row;
        row.N = N_grid[i];
        std::vector<double> a, b, c;
        for (const auto& r : runs[i]) {
            if (!r.diagnostics) {
                ++row.censored;
                continue;
            }
            a.push_back(r.diagnostics->c_tau);
            b.push_back(r.diagnostics->sum_c2);
            c.push_back(r.diagnostics->sum_d);
        }
        row.used = a.size();
        row.c_tau = mean_estimate(a);
        row.sum_c2 = mean_estimate(b);
        row.sum_d = mean_estimate(c);
        c_tau.push_back(row.c_tau.mean);
        sum_c2.push_back(row.sum_c2.mean);
        sum_d.push_back(row.sum_d.mean);
        out.rows.push_back(row);
    }
    out.c_tau_decreasing = strictly_decreasing(c_tau);
    out.sum_c2_decreasing = strictly_decreasing(sum_c2);
    out.sum_d_decreasing = strictly_decreasing(sum_d);
    return out;
}

std::vector<std::vector<double>> kingman_generator(std::size_t n) {
    const auto states = enumerate_partitions(n);
    const std::size_t S = states.size();
    std::vector<std::vector<double>> Q(S, std::vector<double>(S, 0.0));
    for (std::size_t i = 0; i < S; ++i) {
        const std::size_t k = states[i].block_count();
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
                const std::size_t which[] = {a, b};
                const auto target = merge_blocks(states[i], which);
                const auto it = std::lower_bound(states.begin(), states.end(), target);
                Q[i][static_cast<std::size_t>(it - states.begin())] += 1.0;
            }
        Q[i][i] = -pair_count(k);
    }
    return Q;
}

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix multiply(const Matrix& A, const Matrix& B) {
    const std::size_t S = A.size();
    Matrix C(S, std::vector<double>(S, 0.0));
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t k = 0; k < S; ++k) {
            const double a = A[i][k];
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < S; ++j) C[i][j] += a * B[k][j];
        }
    return C;
}

double norm1(const Matrix& A) {
    double best = 0.0;
    for (std::size_t j = 0; j < A.size(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) col += std::fabs(A[i][j]);
        best = std::max(best, col);
    }
    return best;
}

}  // namespace

std::vector<std::vector<double>> matrix_exponential(const std::vector<std::vector<double>>& Q, double t) {
    const std::size_t S = Q.size();
    Matrix A = Q;
    for (auto& row : A)
        for (auto& v : row) v *= t;
    int squarings = 0;
    double norm = norm1(A);
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (auto& row : A)
        for (auto& v : row) v *= scale;

    Matrix result(S, std::vector<double>(S, 0.0));
    for (std::size_t i = 0; i < S; ++i) result[i][i] = 1.0;
    Matrix term = result;
    // With ||A|| <= 1/2 the tail after the term of order j is at most twice
    // that term's norm. Squaring multiplies the error by about 2^squarings,
    // hence the scaled target.
    for (int j = 1; j < 64; ++j) {
        term = multiply(term, A);
        for (auto& row : term)
            for (auto& v : row) v /= j;
        for (std::size_t r = 0; r < S; ++r)
            for (std::size_t c = 0; c < S; ++c) result[r][c] += term[r][c];
        if (2.0 * norm1(term) < 1e-12 * scale) break;
    }
    for (int i = 0; i < squarings; ++i) result = multiply(result, result);
    return result;
}

std::vector<double> kingman_marginal(std::size_t n, double t) {
    if (n > 6) throw std::invalid_argument("exact Kingman marginal limited to n <= 6");
    if (t < 0.0) throw std::invalid_argument("time must be non-negative");
    const auto P = matrix_exponential(kingman_generator(n), t);
    // Singletons are the last state in enumeration order.
    auto row = P.back();
    for (auto& v : row) v = std::max(v, 0.0);
    return row;
}

Partition state_at(const CoalescentPath& path, double t) {
    Partition current = Partition::singletons(path.n);
    for (const auto& e : path.events) {
        if (e.time > t) break;
        current = e.partition;
    }
    return current;
}

std::vector<double> fdd_compare(std::span<const GenealogyPath> paths, std::size_t n, std::span<const double> times) {
    if (n > 6) throw std::invalid_argument("finite-dimensional comparison limited to n <= 6");
    const auto all = enumerate_partitions(n);
    std::vector<double> out;
    for (double t : times) {
        std::vector<std::optional<Partition>> states;
        for (const auto& p : paths) {
            if (p.end == PathEnd::coalesced || t < p.end_time) states.push_back(p.state_at(t));
            else states.push_back(std::nullopt);
        }
        out.push_back(fdd_impl(states, n, t, all));
    }
    return out;
}

std::vector<double> fdd_compare(std::span<const CoalescentPath> paths, std::size_t n, std::span<const double> times) {
    if (n > 6) throw std::invalid_argument("finite-dimensional comparison limited to n <= 6");
    const auto all = enumerate_partitions(n);
    std::vector<double> out;
    for (double t : times) {
        std::vector<std::optional<Partition>> states;
        for (const auto& p : paths) states.push_back(state_at(p, t));
        out.push_back(fdd_impl(states, n, t, all));
    }
    return out;
}

}  // namespace coalsim
