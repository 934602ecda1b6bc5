#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <bit>

#include "gomea/template.hpp"
#include "support.hpp"

using namespace gomea;
using gomea::testing::sin_sqrt_genotype;

TEST_CASE("operator sets")
{
    const auto base = OperatorSet::base();
    REQUIRE(base.size() == 5);
    const char* names[] = {"+", "-", "*", "/", "sin"};
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base.operators()[i].id == i);
        CHECK(base.operators()[i].name == names[i]);
        CHECK(base.operators()[i].arity == (i < 4 ? 2 : 1));
    }
    const auto ext = OperatorSet::extended();
    REQUIRE(ext.size() == 10);
    for (std::size_t i = 5; i < ext.size(); ++i) CHECK(ext.operators()[i].arity == 1);
    CHECK(base.max_arity() == 2);
    CHECK(ext.max_arity() == 2);
}

TEST_CASE("template shape")
{
    const auto t2 = build_template(2, 2);
    CHECK(t2.size() == 7);
    CHECK(t2.child(0, 0) == 1);
    CHECK(t2.child(0, 1) == 2);
    CHECK(t2.parent(6) == 2);
    CHECK(t2.child_ordinal(5) == 0);
    CHECK(t2.child_ordinal(6) == 1);
    CHECK(build_template(1, 2).size() == 3);
    CHECK(build_template(4, 2).size() == 31);
    CHECK(build_template(6, 2).size() == 127);
    for (int h = 1; h <= 10; ++h) CHECK(build_template(h, 2).size() == (std::size_t{1} << (h + 1)) - 1);

    CHECK(t2.depth(0) == 0);
    CHECK(t2.depth(2) == 1);
    CHECK(t2.depth(3) == 2);
    CHECK(t2.is_leaf(3));
    CHECK_FALSE(t2.is_leaf(2));
    CHECK(t2.lowest_common_ancestor(3, 4) == 1);
    CHECK(t2.lowest_common_ancestor(3, 6) == 0);
    CHECK(t2.lowest_common_ancestor(1, 4) == 1);
    CHECK(t2.distance(3, 6) == 4);
    CHECK(t2.distance(0, 5) == 2);
    CHECK(t2.distance(4, 4) == 0);

    const auto t3 = build_template(2, 3);
    CHECK(t3.size() == 13);
    CHECK(t3.parent(12) == 3);
}

TEST_CASE("template size cap")
{
    CHECK_THROWS_AS(build_template(0, 2), TemplateError);
    CHECK_THROWS_AS(build_template(2, 0), TemplateError);
    CHECK_THROWS_AS(build_template(15, 2), TemplateError);
    CHECK_NOTHROW(build_template(14, 2));
    CHECK_NOTHROW(build_template(15, 2, std::size_t{1} << 16));
}

TEST_CASE("activity of the sin/sqrt genotype")
{
    const auto t = build_template(2, 2);
    const auto mask = compute_activity(sin_sqrt_genotype(), t);
    CHECK(mask == ActivityMask{1, 1, 1, 1, 0, 1, 0});
}

TEST_CASE("activity edge cases")
{
    const auto t = build_template(2, 2);
    Genotype g;
    g.symbols.assign(7, Symbol::op(Op::Add));
    g.constants.assign(7, 0.0);
    for (std::size_t i = 3; i < 7; ++i) g.symbols[i] = Symbol::feature(0);
    CHECK(compute_activity(g, t) == ActivityMask(7, 1));

    g.symbols[0] = Symbol::feature(1);
    CHECK(compute_activity(g, t) == ActivityMask{1, 0, 0, 0, 0, 0, 0});

    // Internal terminal turns its subtree into introns.
    g.symbols[0] = Symbol::op(Op::Mul);
    g.symbols[1] = Symbol::constant();
    CHECK(compute_activity(g, t) == ActivityMask{1, 1, 1, 0, 0, 1, 1});
}

TEST_CASE("evaluate examples")
{
    const auto t = build_template(2, 2);
    DataMatrix x(2, 2);
    x(0, 0) = 0.0;
    x(0, 1) = 4.0;
    x(1, 0) = std::numbers::pi / 2;
    x(1, 1) = -9.0;
    const auto out = evaluate(sin_sqrt_genotype(), t, x);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == Catch::Approx(4.0).epsilon(1e-15));

    Genotype c;
    c.symbols.assign(7, Symbol::constant());
    c.constants.assign(7, 3.5);
    for (double v : evaluate(c, t, x)) CHECK(v == 3.5);
}

TEST_CASE("protected operators")
{
    CHECK(apply_binary(Op::Div, 1.0, 0.0) == 1.0);
    CHECK(apply_binary(Op::Div, 1.0, 1e-7) == 1.0);
    CHECK(apply_binary(Op::Div, 3.0, 2.0) == 1.5);
    CHECK(apply_binary(Op::Div, 1.0, 0.0, Protection::AnalyticQuotient) == 1.0);
    CHECK(apply_binary(Op::Div, 2.0, std::sqrt(3.0), Protection::AnalyticQuotient) == Catch::Approx(1.0));
    CHECK(apply_unary(Op::Log, 0.0) == std::log(1e-6));
    CHECK(apply_unary(Op::Log, -std::exp(1.0)) == Catch::Approx(1.0).epsilon(1e-6));
    CHECK(apply_unary(Op::Sqrt, -4.0) == 2.0);
    CHECK(apply_unary(Op::Exp, 1000.0) == 1e300);
    CHECK(std::isfinite(apply_unary(Op::Exp, 1000.0)));

    // x0 / (x1 - x1) divides by exact zero.
    const auto t = build_template(2, 2);
    Genotype g;
    g.symbols = {Symbol::op(Op::Div), Symbol::feature(0), Symbol::op(Op::Sub), Symbol::constant(),
                 Symbol::constant(),  Symbol::feature(1), Symbol::feature(1)};
    g.constants.assign(7, 0.0);
    DataMatrix x(1, 2);
    x(0, 0) = 7.0;
    x(0, 1) = 2.0;
    CHECK(evaluate(g, t, x)[0] == 1.0);
}

TEST_CASE("active signature")
{
    const auto t = build_template(2, 2);
    const auto base = sin_sqrt_genotype();
    auto intron = base;
    intron.constants[4] = 123.0;
    intron.symbols[6] = Symbol::feature(0);
    CHECK(active_signature(base, t) == active_signature(intron, t));
    CHECK(same_active_parts(base, compute_activity(base, t), intron, compute_activity(intron, t)));

    auto leaf = base;
    leaf.symbols[5] = Symbol::feature(0);
    CHECK_FALSE(active_signature(base, t) == active_signature(leaf, t));

    auto with_const = base;
    with_const.symbols[5] = Symbol::constant();
    with_const.constants[5] = 1.0;
    auto other_const = with_const;
    other_const.constants[5] = 1.0 + 1e-12;
    CHECK_FALSE(active_signature(with_const, t) == active_signature(other_const, t));
    CHECK_FALSE(same_active_parts(with_const, compute_activity(with_const, t), other_const,
                                  compute_activity(other_const, t)));
}

TEST_CASE("infix")
{
    const auto t = build_template(2, 2);
    CHECK(to_infix(sin_sqrt_genotype(), t) == "(sin(x0) + sqrt(x1))");
    Genotype g;
    g.symbols.assign(7, Symbol::constant());
    g.constants.assign(7, 0.0);
    g.symbols[0] = Symbol::feature(2);
    CHECK(to_infix(g, t) == "x2");
    g.symbols[0] = Symbol::constant();
    g.constants[0] = 1.25;
    CHECK(to_infix(g, t) == "1.25");
}

TEST_CASE("malformed genotype")
{
    const auto t = build_template(2, 2);
    auto g = sin_sqrt_genotype();
    g.symbols[5] = Symbol::op(Op::Add);
    CHECK_THROWS_AS(evaluate(g, t, DataMatrix(3, 2)), MalformedGenotype);
}

TEST_CASE("interpreter matches the recursive reference")
{
    Rng rng(11);
    for (int h = 1; h <= 4; ++h) {
        const auto t = build_template(h, 2);
        for (auto kind : {OperatorSetKind::Base, OperatorSetKind::Extended}) {
            const auto ops = OperatorSet::make(kind);
            for (auto prot : {Protection::Protected, Protection::AnalyticQuotient}) {
                Interpreter interp(prot);
                std::vector<double> out;
                for (int k = 0; k < 40; ++k) {
                    const auto x = testing::random_data(50, 3, rng);
                    const auto g = testing::random_genotype(t, ops, 3, rng);
                    interp.evaluate(g, t, compute_activity(g, t), x, out);
                    for (std::size_t r = 0; r < x.rows(); ++r) {
                        const double ref = testing::reference_eval(g, t, x, r, 0, prot);
                        REQUIRE(testing::close_rel(out[r], ref, 1e-12));
                    }
                }
            }
        }
    }
}

TEST_CASE("activity properties and intron invariance")
{
    Rng rng(5);
    const auto ops = OperatorSet::extended();
    for (int h = 1; h <= 5; ++h) {
        const auto t = build_template(h, 2);
        for (int k = 0; k < 100; ++k) {
            const auto x = testing::random_data(20, 2, rng);
            auto g = testing::random_genotype(t, ops, 2, rng);
            const auto mask = compute_activity(g, t);
            REQUIRE(mask[0] == 1);
            for (std::size_t i = 1; i < t.size(); ++i) {
                const auto p = t.parent(i);
                const bool expect = mask[p] && g.symbols[p].is_operator() &&
                                    t.child_ordinal(i) < arity(g.symbols[p].operator_kind());
                REQUIRE(static_cast<bool>(mask[i]) == expect);
            }
            const auto before = evaluate(g, t, x);
            const auto sig = active_signature(g, t);
            auto mutated = testing::random_genotype(t, ops, 2, rng);
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (mask[i]) {
                    mutated.symbols[i] = g.symbols[i];
                    mutated.constants[i] = g.constants[i];
                }
            }
            // Inactive operator positions might now activate children the original did not use.
            REQUIRE(compute_activity(mutated, t) == mask);
            const auto after = evaluate(mutated, t, x);
            for (std::size_t r = 0; r < before.size(); ++r) {
                REQUIRE(std::bit_cast<std::uint64_t>(before[r]) == std::bit_cast<std::uint64_t>(after[r]));
            }
            REQUIRE(active_signature(mutated, t) == sig);
        }
    }
}
