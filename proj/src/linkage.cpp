#include "gomea/linkage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace gomea {

namespace {

struct MeasureEntry {
    MeasureKind kind;
    std::string_view name;
};

constexpr std::array<MeasureEntry, 8> kMeasures = {{
    {MeasureKind::Random, "random"},
    {MeasureKind::Univariate, "univariate"},
    {MeasureKind::MI, "mi"},
    {MeasureKind::MIAdjusted, "mi_adjusted"},
    {MeasureKind::MIMasked, "mi_masked"},
    {MeasureKind::Node, "node"},
    {MeasureKind::NodeStatic, "node_static"},
    {MeasureKind::SubfunctionCount, "subfunction_count"},
}};

constexpr std::array<MeasureKind, 8> kAllMeasures = {
    MeasureKind::Random, MeasureKind::Univariate, MeasureKind::MI,         MeasureKind::MIAdjusted,
    MeasureKind::MIMasked, MeasureKind::Node,     MeasureKind::NodeStatic, MeasureKind::SubfunctionCount,
};

constexpr Token kFeatureTokenBase = 16;
constexpr Token kConstantTokenBase = 0x80000000U;

} // namespace

std::string_view measure_name(MeasureKind kind) noexcept
{
    for (const auto& m : kMeasures) {
        if (m.kind == kind) return m.name;
    }
    return "unknown";
}

std::optional<MeasureKind> parse_measure(std::string_view name) noexcept
{
    for (const auto& m : kMeasures) {
        if (m.name == name) return m.kind;
    }
    return std::nullopt;
}

std::span<const MeasureKind> all_measures() noexcept { return kAllMeasures; }

FOS univariate_fos(std::size_t n)
{
    FOS fos;
    fos.subsets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        fos.subsets.push_back({i});
    }
    return fos;
}

// ---------------------------------------------------------------------------

ConstantBins::ConstantBins(std::span<const double> observed, const BinningRule& rule)
    : mode_(rule.mode), count_(std::max(rule.bin_count, 1))
{
    if (observed.empty()) {
        return;
    }
    auto [mn, mx] = std::minmax_element(observed.begin(), observed.end());
    lo_ = *mn;
    hi_ = *mx;
    if (mode_ == BinningMode::EqualFrequency) {
        std::vector<double> sorted(observed.begin(), observed.end());
        std::sort(sorted.begin(), sorted.end());
        for (int k = 1; k < count_; ++k) {
            upper_edges_.push_back(sorted[static_cast<std::size_t>(k) * sorted.size() / static_cast<std::size_t>(count_)]);
        }
    }
}

int ConstantBins::bin(double value) const noexcept
{
    if (mode_ == BinningMode::EqualFrequency) {
        auto it = std::upper_bound(upper_edges_.begin(), upper_edges_.end(), value);
        return std::min(static_cast<int>(it - upper_edges_.begin()), count_ - 1);
    }
    if (!(hi_ > lo_)) {
        return 0;
    }
    const double scaled = std::floor((value - lo_) / (hi_ - lo_) * count_);
    if (!(scaled > 0.0)) {
        return 0;
    }
    return std::min(static_cast<int>(scaled), count_ - 1);
}

Token symbol_token(Symbol s, double constant, const ConstantBins& bins) noexcept
{
    switch (s.kind) {
    case SymbolKind::Operator: return s.index;
    case SymbolKind::Feature: return kFeatureTokenBase + s.index;
    case SymbolKind::Constant: break;
    }
    return kConstantTokenBase + static_cast<Token>(bins.bin(constant));
}

DiscretePopulationView discretize(std::span<const Genotype> pop, const BinningRule& rule,
                                  std::span<const ActivityMask> masks)
{
    DiscretePopulationView view;
    view.individuals = pop.size();
    view.variables = pop.empty() ? 0 : pop.front().size();
    if (!masks.empty() && masks.size() != pop.size()) {
        throw std::invalid_argument("discretize: one activity mask per genotype is required");
    }

    std::vector<double> observed;
    for (const auto& g : pop) {
        if (g.size() != view.variables) {
            throw std::invalid_argument("discretize: genotypes differ in length");
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.symbols[i].kind == SymbolKind::Constant) {
                observed.push_back(g.constants[i]);
            }
        }
    }
    const ConstantBins bins(observed, rule);

    view.tokens.resize(view.individuals * view.variables);
    for (std::size_t n = 0; n < pop.size(); ++n) {
        const auto& g = pop[n];
        for (std::size_t i = 0; i < view.variables; ++i) {
            Token tok = symbol_token(g.symbols[i], g.constants[i], bins);
            if (!masks.empty() && !masks[n][i]) {
                tok = DiscretePopulationView::kMask;
            }
            view.tokens[n * view.variables + i] = tok;
        }
    }
    return view;
}

// ---------------------------------------------------------------------------

namespace {

/// Column i recoded to dense ids 0..k-1 in order of first appearance.
struct DenseColumn {
    std::vector<std::uint32_t> ids;
    std::uint32_t alphabet = 0;
};

DenseColumn dense_column(const DiscretePopulationView& view, std::size_t i)
{
    DenseColumn col;
    col.ids.resize(view.individuals);
    std::vector<Token> seen;
    for (std::size_t n = 0; n < view.individuals; ++n) {
        const Token t = view.at(n, i);
        auto it = std::find(seen.begin(), seen.end(), t);
        if (it == seen.end()) {
            seen.push_back(t);
            col.ids[n] = static_cast<std::uint32_t>(seen.size() - 1);
        } else {
            col.ids[n] = static_cast<std::uint32_t>(it - seen.begin());
        }
    }
    col.alphabet = static_cast<std::uint32_t>(seen.size());
    return col;
}

/// Entropy in bits of a histogram, summed in index order.
double entropy_of_counts(std::span<const std::uint32_t> counts, std::size_t total)
{
    if (total == 0) {
        return 0.0;
    }
    const double n = static_cast<double>(total);
    double acc = 0.0;
    for (auto c : counts) {
        if (c > 0) {
            const double cd = static_cast<double>(c);
            acc += cd * std::log2(cd);
        }
    }
    return std::log2(n) - acc / n;
}

double column_entropy(const DenseColumn& col)
{
    std::vector<std::uint32_t> counts(col.alphabet, 0);
    for (auto id : col.ids) ++counts[id];
    return entropy_of_counts(counts, col.ids.size());
}

double pair_joint_entropy(const DenseColumn& a, const DenseColumn& b, std::vector<std::uint32_t>& scratch)
{
    scratch.assign(static_cast<std::size_t>(a.alphabet) * b.alphabet, 0);
    for (std::size_t n = 0; n < a.ids.size(); ++n) {
        ++scratch[static_cast<std::size_t>(a.ids[n]) * b.alphabet + b.ids[n]];
    }
    return entropy_of_counts(scratch, a.ids.size());
}

// Rounding noise below 1e-12 bits is reported as zero.
double clamp_mi(double mi) noexcept { return mi > 1e-12 ? mi : 0.0; }

} // namespace

double entropy(const DiscretePopulationView& view, std::size_t i) { return column_entropy(dense_column(view, i)); }

double joint_entropy(const DiscretePopulationView& view, std::size_t i, std::size_t j)
{
    std::vector<std::uint32_t> scratch;
    return pair_joint_entropy(dense_column(view, i), dense_column(view, j), scratch);
}

double mutual_information(const DiscretePopulationView& view, std::size_t i, std::size_t j)
{
    const auto a = dense_column(view, i);
    const auto b = dense_column(view, j);
    std::vector<std::uint32_t> scratch;
    return clamp_mi(column_entropy(a) + column_entropy(b) - pair_joint_entropy(a, b, scratch));
}

SimilarityMatrix mutual_information_matrix(const DiscretePopulationView& view)
{
    const std::size_t n = view.variables;
    std::vector<DenseColumn> cols;
    std::vector<double> h(n);
    cols.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cols.push_back(dense_column(view, i));
        h[i] = column_entropy(cols.back());
    }
    SimilarityMatrix s(n, 0.0);
    std::vector<std::uint32_t> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            s.set_symmetric(i, j, clamp_mi(h[i] + h[j] - pair_joint_entropy(cols[i], cols[j], scratch)));
        }
    }
    return s;
}

SimilarityMatrix measure_mi(std::span<const Genotype> pop, const BinningRule& rule)
{
    return mutual_information_matrix(discretize(pop, rule));
}

SimilarityMatrix measure_mi_masked(std::span<const Genotype> pop, const BinningRule& rule,
                                   std::span<const ActivityMask> masks)
{
    if (masks.size() != pop.size()) {
        throw std::invalid_argument("measure_mi_masked: one activity mask per genotype is required");
    }
    return mutual_information_matrix(discretize(pop, rule, masks));
}

SimilarityMatrix adjust_mi(const SimilarityMatrix& mi, const SimilarityMatrix& baseline)
{
    if (mi.size() != baseline.size()) {
        throw std::invalid_argument("adjust_mi: baseline size does not match");
    }
    const std::size_t n = mi.size();
    SimilarityMatrix s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double base = std::max(baseline(i, j), kAdjustedBaselineFloor);
            const double cur = mi(i, j);
            s.set_symmetric(i, j, (cur < kAdjustedBaselineFloor && base == kAdjustedBaselineFloor) ? 1.0 : cur / base);
        }
    }
    return s;
}

SimilarityMatrix measure_mi_adjusted(std::span<const Genotype> pop, const BinningRule& rule,
                                     const SimilarityMatrix* baseline)
{
    if (baseline == nullptr) {
        throw std::invalid_argument("measure_mi_adjusted: missing generation-0 baseline");
    }
    return adjust_mi(measure_mi(pop, rule), *baseline);
}

SimilarityMatrix measure_node_proximity(const Template& t)
{
    const std::size_t n = t.size();
    // Deepest leaves on opposite sides of the root, or a single chain for unary templates.
    const int max_distance = t.max_arity() >= 2 ? 2 * t.height() : t.height();
    const double denom = 1.0 + max_distance;
    SimilarityMatrix s(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            s.set_symmetric(i, j, 1.0 - t.distance(i, j) / denom);
        }
    }
    return s;
}

SimilarityMatrix measure_subfunction_count(const Template& t)
{
    const std::size_t n = t.size();
    SimilarityMatrix s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s(i, i) = t.depth(i) + 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            s.set_symmetric(i, j, t.depth(t.lowest_common_ancestor(i, j)) + 1.0);
        }
    }
    return s;
}

SimilarityMatrix measure_random(std::size_t n, Rng& rng)
{
    SimilarityMatrix s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            s.set_symmetric(i, j, uniform01(rng));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

double tie_key(double similarity) noexcept { return std::nearbyint(similarity * 1e12) / 1e12; }

FOS build_linkage_tree(const SimilarityMatrix& s, Rng& rng)
{
    const std::size_t n = s.size();
    FOS fos = univariate_fos(n);
    if (n < 3) {
        return fos;
    }

    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    std::vector<std::size_t> alive(n);
    std::iota(alive.begin(), alive.end(), std::size_t{0});

    // Cluster-level similarity, indexed by the slot each cluster occupies.
    std::vector<double> sim(s.values().begin(), s.values().end());
    auto at = [&](std::size_t a, std::size_t b) -> double& { return sim[a * n + b]; };

    std::vector<std::pair<std::size_t, std::size_t>> ties;
    while (alive.size() > 2) {
        double best = -std::numeric_limits<double>::infinity();
        ties.clear();
        for (std::size_t x = 0; x < alive.size(); ++x) {
            for (std::size_t y = x + 1; y < alive.size(); ++y) {
                const double key = tie_key(at(alive[x], alive[y]));
                if (key > best) {
                    best = key;
                    ties.clear();
                    ties.emplace_back(x, y);
                } else if (key == best) {
                    ties.emplace_back(x, y);
                }
            }
        }
        const auto [x, y] = ties.size() == 1 ? ties.front() : ties[uniform_index(rng, ties.size())];
        const std::size_t a = alive[x];
        const std::size_t b = alive[y];
        const double wa = static_cast<double>(members[a].size());
        const double wb = static_cast<double>(members[b].size());
        for (std::size_t c : alive) {
            if (c == a || c == b) continue;
            const double v = (wa * at(a, c) + wb * at(b, c)) / (wa + wb);
            at(a, c) = v;
            at(c, a) = v;
        }
        std::vector<std::size_t> merged;
        merged.reserve(members[a].size() + members[b].size());
        std::merge(members[a].begin(), members[a].end(), members[b].begin(), members[b].end(),
                   std::back_inserter(merged));
        members[a] = merged;
        members[b].clear();
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(y));
        fos.subsets.push_back(std::move(merged));
    }
    return fos;
}

// ---------------------------------------------------------------------------

MeasureKind LinkageConfig::resolved_kind() const
{
    if (!adjusted) {
        return kind;
    }
    switch (kind) {
    case MeasureKind::MI:
    case MeasureKind::MIAdjusted: return MeasureKind::MIAdjusted;
    case MeasureKind::MIMasked:
        throw ConfigError("the bias adjustment cannot be combined with the masked MI measure: variables inactive "
                          "in the whole initial population have zero baseline MI");
    default:
        throw ConfigError(fmt::format("the bias adjustment only applies to MI measures, not '{}'",
                                      measure_name(kind)));
    }
}

LinkageLearner::LinkageLearner(const LinkageConfig& config, const Template& tmpl)
    : kind_(config.resolved_kind()), binning_(config.binning), tmpl_(tmpl)
{
    switch (kind_) {
    case MeasureKind::Node:
    case MeasureKind::NodeStatic: fixed_ = measure_node_proximity(tmpl); break;
    case MeasureKind::SubfunctionCount: fixed_ = measure_subfunction_count(tmpl); break;
    default: break;
    }
}

const FOS& LinkageLearner::learn(std::span<const Genotype> pop, std::span<const ActivityMask> masks, Rng& rng)
{
    const std::size_t n = tmpl_.size();
    switch (kind_) {
    case MeasureKind::Univariate:
        if (fos_.subsets.empty()) fos_ = univariate_fos(n);
        return fos_;
    case MeasureKind::Random: similarity_ = measure_random(n, rng); break;
    case MeasureKind::MI: similarity_ = measure_mi(pop, binning_); break;
    case MeasureKind::MIAdjusted: {
        auto mi = measure_mi(pop, binning_);
        if (!baseline_) baseline_ = mi;
        similarity_ = adjust_mi(mi, *baseline_);
        break;
    }
    case MeasureKind::MIMasked: similarity_ = measure_mi_masked(pop, binning_, masks); break;
    case MeasureKind::NodeStatic:
        similarity_ = *fixed_;
        if (!static_built_) {
            fos_ = build_linkage_tree(similarity_, rng);
            static_built_ = true;
        }
        return fos_;
    case MeasureKind::Node:
    case MeasureKind::SubfunctionCount: similarity_ = *fixed_; break;
    }
    fos_ = build_linkage_tree(similarity_, rng);
    return fos_;
}

} // namespace gomea
