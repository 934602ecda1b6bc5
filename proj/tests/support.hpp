#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstddef>
#include <vector>

#include "gomea/data_matrix.hpp"
#include "gomea/random.hpp"
#include "gomea/template.hpp"

namespace gomea::testing {

// Straightforward recursive interpreter, written independently of the library's operator code.
inline double reference_eval(const Genotype& g, const Template& t, const DataMatrix& x, std::size_t row,
                             std::size_t node, Protection p = Protection::Protected)
{
    const Symbol s = g.symbols[node];
    if (s.kind == SymbolKind::Feature) return x(row, s.index);
    if (s.kind == SymbolKind::Constant) return g.constants[node];
    const double a = reference_eval(g, t, x, row, t.child(node, 0), p);
    switch (s.operator_kind()) {
    case Op::Add: return a + reference_eval(g, t, x, row, t.child(node, 1), p);
    case Op::Sub: return a - reference_eval(g, t, x, row, t.child(node, 1), p);
    case Op::Mul: return a * reference_eval(g, t, x, row, t.child(node, 1), p);
    case Op::Div: {
        const double b = reference_eval(g, t, x, row, t.child(node, 1), p);
        if (p == Protection::AnalyticQuotient) return a / std::sqrt(1.0 + b * b);
        return std::fabs(b) > 1e-6 ? a / b : 1.0;
    }
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Exp: return std::min(std::exp(a), 1e300);
    case Op::Log: return std::log(std::fabs(a) + 1e-6);
    case Op::Sqrt: return std::sqrt(std::fabs(a));
    case Op::Square: return a * a;
    }
    return 0.0;
}

// Any symbol at internal positions, terminals at leaves.
inline Genotype random_genotype(const Template& t, const OperatorSet& ops, std::size_t features, Rng& rng,
                                double op_prob = 0.6)
{
    Genotype g;
    g.symbols.resize(t.size());
    g.constants.assign(t.size(), 0.0);
    std::uniform_real_distribution<double> cdist(-5.0, 5.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t.is_leaf(i) && uniform01(rng) < op_prob) {
            g.symbols[i] = Symbol::op(ops.operators()[uniform_index(rng, ops.size())].op);
        } else if (uniform_index(rng, features + 1) < features) {
            g.symbols[i] = Symbol::feature(uniform_index(rng, features));
        } else {
            g.symbols[i] = Symbol::constant();
            g.constants[i] = cdist(rng);
        }
    }
    return g;
}

inline DataMatrix random_data(std::size_t rows, std::size_t cols, Rng& rng, double lo = -3.0, double hi = 3.0)
{
    DataMatrix x(rows, cols);
    std::uniform_real_distribution<double> d(lo, hi);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) x(r, c) = d(rng);
    }
    return x;
}

// sin(x0) + sqrt(x1) on the height-2 binary template, with constants in the introns.
inline Genotype sin_sqrt_genotype()
{
    Genotype g;
    g.symbols = {Symbol::op(Op::Add), Symbol::op(Op::Sin),  Symbol::op(Op::Sqrt), Symbol::feature(0),
                 Symbol::constant(),  Symbol::feature(1), Symbol::constant()};
    g.constants = {0, 0, 0, 0, 0.5, 0, -2.0};
    return g;
}

inline bool close_rel(double a, double b, double tol)
{
    if (a == b) return true;
    if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace gomea::testing
