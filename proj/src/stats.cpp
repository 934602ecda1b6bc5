#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gomea/experiments.hpp"

namespace gomea {

namespace {

double mean_of(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Linear interpolation between order statistics (type 7).
double quantile_sorted(std::span<const double> sorted, double q)
{
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double bootstrap_statistic(std::vector<double>& sample)
{
    return sample.size() >= 4 ? stats_iqm(sample) : mean_of(sample);
}

ConfidenceInterval percentile_interval(std::vector<double>& stats, double level)
{
    std::sort(stats.begin(), stats.end());
    const double alpha = (1.0 - level) / 2.0;
    return {quantile_sorted(stats, alpha), quantile_sorted(stats, 1.0 - alpha)};
}

std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double stats_median(std::span<const double> values)
{
    if (values.empty()) {
        throw StatsError("median of an empty sample");
    }
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
}

double stats_iqm(std::span<const double> values)
{
    if (values.size() < 4) {
        throw StatsError(fmt::format("the interquartile mean needs at least 4 values, got {}", values.size()));
    }
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const std::size_t cut = s.size() / 4;
    return mean_of(std::span<const double>(s).subspan(cut, s.size() - 2 * cut));
}

ConfidenceInterval stats_bootstrap_ci(std::span<const double> values, double level, int resamples, Rng& rng)
{
    const std::vector<double> group(values.begin(), values.end());
    return stats_bootstrap_ci(std::span<const std::vector<double>>(&group, 1), level, resamples, rng);
}

ConfidenceInterval stats_bootstrap_ci(std::span<const std::vector<double>> groups, double level, int resamples,
                                      Rng& rng)
{
    if (groups.empty() || resamples < 1 || !(level > 0.0 && level < 1.0)) {
        throw StatsError("bootstrap: need at least one group, one resample and a level in (0, 1)");
    }
    std::size_t total = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw StatsError("bootstrap: empty group");
        total += g.size();
    }
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(resamples));
    std::vector<double> sample(total);
    for (int b = 0; b < resamples; ++b) {
        std::size_t k = 0;
        for (const auto& g : groups) {
            for (std::size_t i = 0; i < g.size(); ++i) sample[k++] = g[uniform_index(rng, g.size())];
        }
        stats.push_back(bootstrap_statistic(sample));
    }
    return percentile_interval(stats, level);
}

double spearman(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) {
        throw StatsError("spearman: samples must have equal length of at least 2");
    }
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double ma = mean_of(ra);
    const double mb = mean_of(rb);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) {
        return 0.0;
    }
    return cov / std::sqrt(va * vb);
}

std::vector<double> off_diagonal(const SimilarityMatrix& s)
{
    std::vector<double> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) out.push_back(s(i, j));
    }
    return out;
}

} // namespace gomea
