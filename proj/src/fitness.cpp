#include "gomea/fitness.hpp"

#include <cmath>

#include <fmt/format.h>

namespace gomea {

namespace {

constexpr double kDegenerateVariance = 1e-12;

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what)
{
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument(
            fmt::format("{}: prediction and target lengths must match and be non-zero ({} vs {})", what, a.size(),
                        b.size()));
    }
}

double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double mse(std::span<const double> pred, std::span<const double> target)
{
    require_same_length(pred, target, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double variance(std::span<const double> values)
{
    const double m = mean(values);
    double s = 0.0;
    for (double x : values) s += (x - m) * (x - m);
    return s / static_cast<double>(values.size());
}

double r2(std::span<const double> pred, std::span<const double> target)
{
    return 1.0 - mse(pred, target) / variance(target);
}

LinearScaling linear_scale(std::span<const double> pred, std::span<const double> target)
{
    require_same_length(pred, target, "linear_scale");
    const double mp = mean(pred);
    const double mt = mean(target);
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dp = pred[i] - mp;
        cov += dp * (target[i] - mt);
        var += dp * dp;
    }
    cov /= static_cast<double>(pred.size());
    var /= static_cast<double>(pred.size());
    if (var < kDegenerateVariance) {
        return {mt, 0.0};
    }
    const double slope = cov / var;
    return {mt - slope * mp, slope};
}

FitnessValue score_predictions(std::span<const double> pred, std::span<const double> target, bool linear_scaling)
{
    FitnessValue fv;
    for (double p : pred) {
        if (!std::isfinite(p)) {
            return fv;
        }
    }
    if (linear_scaling) {
        fv.scaling = linear_scale(pred, target);
        if (!std::isfinite(fv.scaling.intercept) || !std::isfinite(fv.scaling.slope)) {
            fv.scaling = {};
            return fv;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = fv.scaling.intercept + fv.scaling.slope * pred[i] - target[i];
            s += d * d;
        }
        fv.r2 = sanitize_fitness(1.0 - (s / static_cast<double>(pred.size())) / variance(target));
    } else {
        fv.r2 = sanitize_fitness(r2(pred, target));
    }
    return fv;
}

FitnessFunction::FitnessFunction(const Template& tmpl, const DataMatrix& x, std::span<const double> y,
                                 bool linear_scaling, EvaluationBudget& budget, Protection protection)
    : tmpl_(tmpl), x_(x), y_(y), ls_(linear_scaling), budget_(budget), interp_(protection)
{
    if (x.rows() != y.size() || y.empty()) {
        throw std::invalid_argument("FitnessFunction: feature rows and targets differ in length");
    }
}

FitnessValue FitnessFunction::evaluate(const Genotype& g, const ActivityMask& mask)
{
    if (!budget_.try_consume()) {
        throw BudgetExhausted();
    }
    interp_.evaluate(g, tmpl_, mask, x_, pred_);
    return score_predictions(pred_, y_, ls_);
}

double holdout_r2(const Genotype& g, const Template& t, const LinearScaling& scaling, const DataMatrix& x,
                  std::span<const double> y, Protection protection)
{
    auto pred = evaluate(g, t, x, protection);
    for (double& p : pred) {
        p = scaling.intercept + scaling.slope * p;
    }
    for (double p : pred) {
        if (!std::isfinite(p)) {
            return kWorstFitness;
        }
    }
    return sanitize_fitness(r2(pred, y));
}

} // namespace gomea
