#include "gomea/template.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include <fmt/format.h>

namespace gomea {

namespace {

constexpr double kProtectEps = 1e-6;
constexpr double kExpCap = 1e300;

constexpr std::array<std::string_view, 10> kOpNames = {"+", "-", "*", "/", "sin", "cos", "exp", "log", "sqrt", "sq"};

} // namespace

std::string_view op_name(Op op) noexcept { return kOpNames[static_cast<std::size_t>(op)]; }

OperatorSet::OperatorSet(OperatorSetKind kind) : kind_(kind)
{
    const int count = kind == OperatorSetKind::Base ? 5 : 10;
    for (int i = 0; i < count; ++i) {
        auto op = static_cast<Op>(i);
        ops_.push_back({static_cast<std::uint16_t>(i), op, op_name(op), arity(op)});
    }
}

OperatorSet OperatorSet::base() { return OperatorSet(OperatorSetKind::Base); }
OperatorSet OperatorSet::extended() { return OperatorSet(OperatorSetKind::Extended); }

int OperatorSet::max_arity() const noexcept
{
    int m = 0;
    for (const auto& o : ops_) {
        m = std::max(m, o.arity);
    }
    return m;
}

double apply_unary(Op op, double x) noexcept
{
    switch (op) {
    case Op::Sin: return std::sin(x);
    case Op::Cos: return std::cos(x);
    case Op::Exp: return std::min(std::exp(x), kExpCap);
    case Op::Log: return std::log(std::abs(x) + kProtectEps);
    case Op::Sqrt: return std::sqrt(std::abs(x));
    case Op::Square: return x * x;
    default: return x;
    }
}

double apply_binary(Op op, double a, double b, Protection p) noexcept
{
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
        if (p == Protection::AnalyticQuotient) {
            return a / std::sqrt(1.0 + b * b);
        }
        return std::abs(b) > kProtectEps ? a / b : 1.0;
    default: return a;
    }
}

// ---------------------------------------------------------------------------

Template::Template(int height, int max_arity, std::size_t node_cap) : height_(height), max_arity_(max_arity)
{
    if (height < 1 || max_arity < 1) {
        throw TemplateError("template height and arity must be at least 1");
    }
    std::size_t total = 0;
    std::size_t level = 1;
    for (int d = 0; d <= height; ++d) {
        total += level;
        if (total > node_cap) {
            throw TemplateError(fmt::format("template of height {} and arity {} exceeds the node cap of {}", height,
                                            max_arity, node_cap));
        }
        level *= static_cast<std::size_t>(max_arity);
    }
    depth_.reserve(total);
    level = 1;
    for (int d = 0; d <= height; ++d) {
        depth_.insert(depth_.end(), level, d);
        level *= static_cast<std::size_t>(max_arity);
    }
}

std::size_t Template::lowest_common_ancestor(std::size_t i, std::size_t j) const noexcept
{
    while (i != j) {
        if (depth_[i] >= depth_[j]) {
            i = parent(i);
        } else {
            j = parent(j);
        }
    }
    return i;
}

int Template::distance(std::size_t i, std::size_t j) const noexcept
{
    auto lca = lowest_common_ancestor(i, j);
    return depth_[i] + depth_[j] - 2 * depth_[lca];
}

Template build_template(int height, int max_arity, std::size_t node_cap)
{
    return Template(height, max_arity, node_cap);
}

// ---------------------------------------------------------------------------

ActivityMask compute_activity(const Genotype& g, const Template& t)
{
    const std::size_t n = t.size();
    ActivityMask active(n, 0);
    if (n == 0) {
        return active;
    }
    active[0] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i] || t.is_leaf(i) || !g.symbols[i].is_operator()) {
            continue;
        }
        const int a = arity(g.symbols[i].operator_kind());
        for (int k = 0; k < a && k < t.max_arity(); ++k) {
            active[t.child(i, k)] = 1;
        }
    }
    return active;
}

namespace {

std::uint64_t encode_symbol(std::size_t position, Symbol s) noexcept
{
    return (static_cast<std::uint64_t>(position) << 32) | (static_cast<std::uint64_t>(s.kind) << 16) | s.index;
}

} // namespace

std::uint64_t Signature::hash() const noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto w : words) {
        for (int b = 0; b < 8; ++b) {
            h ^= (w >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

Signature active_signature(const Genotype& g, const Template& t)
{
    const auto mask = compute_activity(g, t);
    Signature sig;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        sig.words.push_back(encode_symbol(i, g.symbols[i]));
        if (g.symbols[i].kind == SymbolKind::Constant) {
            sig.words.push_back(std::bit_cast<std::uint64_t>(g.constants[i]));
        }
    }
    return sig;
}

bool same_active_parts(const Genotype& a, const ActivityMask& mask_a, const Genotype& b,
                       const ActivityMask& mask_b) noexcept
{
    if (mask_a != mask_b) {
        return false;
    }
    for (std::size_t i = 0; i < mask_a.size(); ++i) {
        if (!mask_a[i]) {
            continue;
        }
        if (a.symbols[i] != b.symbols[i]) {
            return false;
        }
        if (a.symbols[i].kind == SymbolKind::Constant &&
            std::bit_cast<std::uint64_t>(a.constants[i]) != std::bit_cast<std::uint64_t>(b.constants[i])) {
            return false;
        }
    }
    return true;
}

namespace {

void append_infix(const Genotype& g, const Template& t, std::size_t i, std::string& out)
{
    const Symbol s = g.symbols[i];
    switch (s.kind) {
    case SymbolKind::Feature: out += fmt::format("x{}", s.index); return;
    case SymbolKind::Constant: out += fmt::format("{}", g.constants[i]); return;
    case SymbolKind::Operator: break;
    }
    const Op op = s.operator_kind();
    if (t.is_leaf(i)) {
        throw MalformedGenotype(fmt::format("operator '{}' at leaf position {}", op_name(op), i));
    }
    if (arity(op) == 2) {
        out += '(';
        append_infix(g, t, t.child(i, 0), out);
        out += fmt::format(" {} ", op_name(op));
        append_infix(g, t, t.child(i, 1), out);
        out += ')';
    } else {
        out += op_name(op);
        out += '(';
        append_infix(g, t, t.child(i, 0), out);
        out += ')';
    }
}

} // namespace

std::string to_infix(const Genotype& g, const Template& t)
{
    std::string out;
    append_infix(g, t, 0, out);
    return out;
}

// ---------------------------------------------------------------------------

void Interpreter::evaluate(const Genotype& g, const Template& t, const ActivityMask& mask, const DataMatrix& data,
                           std::vector<double>& out)
{
    const std::size_t n = t.size();
    const std::size_t rows = data.rows();
    if (g.size() != n || mask.size() != n) {
        throw MalformedGenotype("genotype length does not match the template");
    }
    buffer_.resize(n * rows);
    node_values_.assign(n, nullptr);

    // Children have larger breadth-first indices than their parents.
    for (std::size_t idx = n; idx-- > 0;) {
        if (!mask[idx]) {
            continue;
        }
        const Symbol s = g.symbols[idx];
        double* dst = buffer_.data() + idx * rows;
        switch (s.kind) {
        case SymbolKind::Feature:
            if (s.index >= data.cols()) {
                throw MalformedGenotype(fmt::format("feature x{} at position {} exceeds the {} available features",
                                                    s.index, idx, data.cols()));
            }
            node_values_[idx] = data.column(s.index).data();
            break;
        case SymbolKind::Constant:
            std::fill(dst, dst + rows, g.constants[idx]);
            node_values_[idx] = dst;
            break;
        case SymbolKind::Operator: {
            const Op op = s.operator_kind();
            if (t.is_leaf(idx)) {
                throw MalformedGenotype(fmt::format("operator '{}' at leaf position {}", op_name(op), idx));
            }
            const double* lhs = node_values_[t.child(idx, 0)];
            if (arity(op) == 2) {
                const double* rhs = node_values_[t.child(idx, 1)];
                if (lhs == nullptr || rhs == nullptr) {
                    throw MalformedGenotype(fmt::format("missing operand for position {}", idx));
                }
                switch (op) {
                case Op::Add:
                    for (std::size_t r = 0; r < rows; ++r) dst[r] = lhs[r] + rhs[r];
                    break;
                case Op::Sub:
                    for (std::size_t r = 0; r < rows; ++r) dst[r] = lhs[r] - rhs[r];
                    break;
                case Op::Mul:
                    for (std::size_t r = 0; r < rows; ++r) dst[r] = lhs[r] * rhs[r];
                    break;
                default:
                    for (std::size_t r = 0; r < rows; ++r) dst[r] = apply_binary(op, lhs[r], rhs[r], protection_);
                    break;
                }
            } else {
                if (lhs == nullptr) {
                    throw MalformedGenotype(fmt::format("missing operand for position {}", idx));
                }
                for (std::size_t r = 0; r < rows; ++r) dst[r] = apply_unary(op, lhs[r]);
            }
            node_values_[idx] = dst;
            break;
        }
        }
    }
    out.assign(node_values_[0], node_values_[0] + rows);
}

std::vector<double> evaluate(const Genotype& g, const Template& t, const DataMatrix& data, Protection protection)
{
    Interpreter interp(protection);
    std::vector<double> out;
    interp.evaluate(g, t, compute_activity(g, t), data, out);
    return out;
}

} // namespace gomea
