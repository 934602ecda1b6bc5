#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gomea/random.hpp"
#include "gomea/template.hpp"

namespace gomea {

enum class MeasureKind { Random, Univariate, MI, MIAdjusted, MIMasked, Node, NodeStatic, SubfunctionCount };

std::string_view measure_name(MeasureKind kind) noexcept;
/// Accepts the names produced by measure_name (e.g. "mi_masked", "node_static").
std::optional<MeasureKind> parse_measure(std::string_view name) noexcept;
std::span<const MeasureKind> all_measures() noexcept;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Symmetric L x L matrix of pairwise similarities.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    explicit SimilarityMatrix(std::size_t n, double fill = 0.0) : n_(n), values_(n * n, fill) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[i * n_ + j]; }
    void set_symmetric(std::size_t i, std::size_t j, double v) noexcept
    {
        values_[i * n_ + j] = v;
        values_[j * n_ + i] = v;
    }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

/// Family of subsets; each subset is a sorted list of variable indices.
struct FOS {
    std::vector<std::vector<std::size_t>> subsets;
    friend bool operator==(const FOS&, const FOS&) = default;
};

FOS univariate_fos(std::size_t n);

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

enum class BinningMode { EqualWidth, EqualFrequency };

struct BinningRule {
    int bin_count = 25;
    BinningMode mode = BinningMode::EqualWidth;
};

/// Bin assignment for constant values, fitted on the constants observed in one population.
class ConstantBins {
public:
    ConstantBins(std::span<const double> observed, const BinningRule& rule);
    int bin(double value) const noexcept;
    int bin_count() const noexcept { return count_; }

private:
    BinningMode mode_;
    int count_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::vector<double> upper_edges_; ///< equal-frequency only
};

using Token = std::uint32_t;

/// N x L matrix of discrete tokens, row-major by individual.
struct DiscretePopulationView {
    static constexpr Token kMask = 0xffffffffU;

    std::size_t individuals = 0;
    std::size_t variables = 0;
    std::vector<Token> tokens;

    Token at(std::size_t individual, std::size_t variable) const noexcept
    {
        return tokens[individual * variables + variable];
    }
};

/// Token for symbol at one position: operator id, feature id, or constant bin id (disjoint ranges).
Token symbol_token(Symbol s, double constant, const ConstantBins& bins) noexcept;

DiscretePopulationView discretize(std::span<const Genotype> pop, const BinningRule& rule,
                                  std::span<const ActivityMask> masks = {});

// ---------------------------------------------------------------------------
// Information measures (bits)
// ---------------------------------------------------------------------------

double entropy(const DiscretePopulationView& view, std::size_t i);
double joint_entropy(const DiscretePopulationView& view, std::size_t i, std::size_t j);
double mutual_information(const DiscretePopulationView& view, std::size_t i, std::size_t j);

/// Pairwise MI of every variable pair; diagonal is 0.
SimilarityMatrix mutual_information_matrix(const DiscretePopulationView& view);

SimilarityMatrix measure_mi(std::span<const Genotype> pop, const BinningRule& rule);
SimilarityMatrix measure_mi_masked(std::span<const Genotype> pop, const BinningRule& rule,
                                   std::span<const ActivityMask> masks);

inline constexpr double kAdjustedBaselineFloor = 1e-12;

/// MI divided element-wise by the generation-0 MI matrix (floored at 1e-12). Pairs where both the
/// current and the baseline MI are below the floor are reported as 1 (unchanged).
SimilarityMatrix adjust_mi(const SimilarityMatrix& mi, const SimilarityMatrix& baseline);
SimilarityMatrix measure_mi_adjusted(std::span<const Genotype> pop, const BinningRule& rule,
                                     const SimilarityMatrix* baseline);

SimilarityMatrix measure_node_proximity(const Template& t);
SimilarityMatrix measure_subfunction_count(const Template& t);
SimilarityMatrix measure_random(std::size_t n, Rng& rng);

// ---------------------------------------------------------------------------
// Linkage tree
// ---------------------------------------------------------------------------

/// Similarity rounded to 12 decimal digits; values with equal keys are ties.
double tie_key(double similarity) noexcept;

/// UPGMA linkage tree. Singletons first, then merges in merge order; the full set is dropped.
FOS build_linkage_tree(const SimilarityMatrix& s, Rng& rng);

struct LinkageConfig {
    MeasureKind kind = MeasureKind::MIMasked;
    /// Requests the bias-adjusted variant of an MI measure.
    bool adjusted = false;
    BinningRule binning;

    /// Folds `adjusted` into `kind`; throws ConfigError for masked + adjusted.
    MeasureKind resolved_kind() const;
};

/// Per-population linkage learner: owns the generation-0 baseline and the static FOS cache.
class LinkageLearner {
public:
    LinkageLearner(const LinkageConfig& config, const Template& tmpl);

    /// Learns the FOS for the current population. masks must match pop.
    const FOS& learn(std::span<const Genotype> pop, std::span<const ActivityMask> masks, Rng& rng);

    /// Similarity matrix used by the last call to learn(); empty for Univariate.
    const SimilarityMatrix& last_similarity() const noexcept { return similarity_; }
    bool has_similarity() const noexcept { return kind_ != MeasureKind::Univariate; }
    MeasureKind kind() const noexcept { return kind_; }
    const FOS& last_fos() const noexcept { return fos_; }

private:
    MeasureKind kind_;
    BinningRule binning_;
    const Template& tmpl_;
    std::optional<SimilarityMatrix> baseline_;
    std::optional<SimilarityMatrix> fixed_;
    bool static_built_ = false;
    SimilarityMatrix similarity_;
    FOS fos_;
};

} // namespace gomea
