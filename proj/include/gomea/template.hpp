#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gomea/data_matrix.hpp"

namespace gomea {

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Operator ids. The base set occupies ids 0..4 and the extended set 0..9, so
/// an operator's id is the same in both sets.
enum class Op : std::uint8_t { Add = 0, Sub, Mul, Div, Sin, Cos, Exp, Log, Sqrt, Square };

constexpr int arity(Op op) noexcept { return static_cast<int>(op) < 4 ? 2 : 1; }

std::string_view op_name(Op op) noexcept;

struct OperatorInfo {
    std::uint16_t id;
    Op op;
    std::string_view name;
    int arity;
};

enum class OperatorSetKind { Base, Extended };

class OperatorSet {
public:
    static OperatorSet base();
    static OperatorSet extended();
    static OperatorSet make(OperatorSetKind kind) { return kind == OperatorSetKind::Base ? base() : extended(); }

    std::span<const OperatorInfo> operators() const noexcept { return ops_; }
    std::size_t size() const noexcept { return ops_.size(); }
    int max_arity() const noexcept;
    OperatorSetKind kind() const noexcept { return kind_; }

private:
    explicit OperatorSet(OperatorSetKind kind);
    OperatorSetKind kind_;
    std::vector<OperatorInfo> ops_;
};

/// Policy for operators undefined on part of their domain.
enum class Protection {
    /// a/b if |b| > 1e-6 else 1; log(|x|+1e-6); sqrt(|x|); exp capped at 1e300.
    Protected,
    /// Analytic quotient a/sqrt(1+b^2); remaining operators as in Protected.
    AnalyticQuotient,
};

double apply_unary(Op op, double x) noexcept;
double apply_binary(Op op, double a, double b, Protection p = Protection::Protected) noexcept;

// ---------------------------------------------------------------------------
// Template
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultMaxTemplateNodes = std::size_t{1} << 15;

class TemplateError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Full max_arity-ary tree of the given height, indexed breadth-first.
class Template {
public:
    Template(int height, int max_arity, std::size_t node_cap = kDefaultMaxTemplateNodes);

    int height() const noexcept { return height_; }
    int max_arity() const noexcept { return max_arity_; }
    std::size_t size() const noexcept { return depth_.size(); }

    /// Parent of node i; undefined for the root.
    std::size_t parent(std::size_t i) const noexcept { return (i - 1) / static_cast<std::size_t>(max_arity_); }
    std::size_t child(std::size_t i, int k) const noexcept
    {
        return static_cast<std::size_t>(max_arity_) * i + 1 + static_cast<std::size_t>(k);
    }
    /// Position of node i among its siblings (0 = leftmost).
    int child_ordinal(std::size_t i) const noexcept
    {
        return static_cast<int>((i - 1) % static_cast<std::size_t>(max_arity_));
    }
    int depth(std::size_t i) const noexcept { return depth_[i]; }
    bool is_leaf(std::size_t i) const noexcept { return depth_[i] == height_; }

    std::size_t lowest_common_ancestor(std::size_t i, std::size_t j) const noexcept;
    /// Number of template edges on the path between i and j.
    int distance(std::size_t i, std::size_t j) const noexcept;

private:
    int height_;
    int max_arity_;
    std::vector<int> depth_;
};

Template build_template(int height, int max_arity, std::size_t node_cap = kDefaultMaxTemplateNodes);

// ---------------------------------------------------------------------------
// Genotype
// ---------------------------------------------------------------------------

enum class SymbolKind : std::uint8_t { Operator, Feature, Constant };

struct Symbol {
    SymbolKind kind = SymbolKind::Constant;
    std::uint16_t index = 0; ///< operator id or feature index; unused for constants

    static constexpr Symbol op(Op o) noexcept { return {SymbolKind::Operator, static_cast<std::uint16_t>(o)}; }
    static constexpr Symbol feature(std::size_t f) noexcept
    {
        return {SymbolKind::Feature, static_cast<std::uint16_t>(f)};
    }
    static constexpr Symbol constant() noexcept { return {SymbolKind::Constant, 0}; }

    bool is_operator() const noexcept { return kind == SymbolKind::Operator; }
    Op operator_kind() const noexcept { return static_cast<Op>(index); }

    friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct Genotype {
    std::vector<Symbol> symbols;
    std::vector<double> constants; ///< constants[i] is meaningful only when symbols[i] is a Constant

    std::size_t size() const noexcept { return symbols.size(); }

    friend bool operator==(const Genotype&, const Genotype&) = default;
};

using ActivityMask = std::vector<std::uint8_t>;

class MalformedGenotype : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ActivityMask compute_activity(const Genotype& g, const Template& t);

/// Canonical encoding of the active part of a genotype.
struct Signature {
    std::vector<std::uint64_t> words;
    friend bool operator==(const Signature&, const Signature&) = default;
    std::uint64_t hash() const noexcept;
};

Signature active_signature(const Genotype& g, const Template& t);

/// True iff the active parts of a and b (including their activity masks) are identical.
bool same_active_parts(const Genotype& a, const ActivityMask& mask_a, const Genotype& b,
                       const ActivityMask& mask_b) noexcept;

std::string to_infix(const Genotype& g, const Template& t);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Reusable evaluation workspace. Not thread-safe; use one per worker.
class Interpreter {
public:
    explicit Interpreter(Protection protection = Protection::Protected) : protection_(protection) {}

    /// Writes one prediction per row of data into out (resized as needed).
    void evaluate(const Genotype& g, const Template& t, const ActivityMask& mask, const DataMatrix& data,
                  std::vector<double>& out);

    Protection protection() const noexcept { return protection_; }

private:
    Protection protection_;
    std::vector<double> buffer_;
    std::vector<const double*> node_values_;
};

std::vector<double> evaluate(const Genotype& g, const Template& t, const DataMatrix& data,
                             Protection protection = Protection::Protected);

} // namespace gomea
