#pragma once

#include <atomic>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gomea/data_matrix.hpp"
#include "gomea/template.hpp"

namespace gomea {

inline constexpr double kWorstFitness = -std::numeric_limits<double>::infinity();

double mse(std::span<const double> pred, std::span<const double> target);

/// Population variance (divides by N).
double variance(std::span<const double> values);

/// Coefficient of determination, 1 - MSE/var(target).
double r2(std::span<const double> pred, std::span<const double> target);

struct LinearScaling {
    double intercept = 0.0;
    double slope = 1.0;
    friend bool operator==(const LinearScaling&, const LinearScaling&) = default;
};

/// Least-squares affine map of pred onto target.
LinearScaling linear_scale(std::span<const double> pred, std::span<const double> target);

struct FitnessValue {
    double r2 = kWorstFitness;
    LinearScaling scaling;
    int eval_cost = 1;
};

/// Maps NaN and +/-inf to the worst fitness.
inline double sanitize_fitness(double r2) noexcept
{
    return (r2 != r2 || r2 == std::numeric_limits<double>::infinity() || r2 == kWorstFitness) ? kWorstFitness : r2;
}

class BudgetExhausted : public std::runtime_error {
public:
    BudgetExhausted() : std::runtime_error("evaluation budget exhausted") {}
};

/// Shared evaluation counter. used never exceeds limit.
class EvaluationBudget {
public:
    explicit EvaluationBudget(std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()) : limit_(limit) {}

    EvaluationBudget(const EvaluationBudget&) = delete;
    EvaluationBudget& operator=(const EvaluationBudget&) = delete;

    /// Reserves one evaluation; false if the budget is spent.
    bool try_consume() noexcept
    {
        auto cur = used_.load(std::memory_order_relaxed);
        while (cur < limit_) {
            if (used_.compare_exchange_weak(cur, cur + 1, std::memory_order_relaxed)) {
                return true;
            }
        }
        return false;
    }

    std::uint64_t used() const noexcept { return used_.load(std::memory_order_relaxed); }
    std::uint64_t limit() const noexcept { return limit_; }
    bool exhausted() const noexcept { return used() >= limit_; }

private:
    std::atomic<std::uint64_t> used_{0};
    std::uint64_t limit_;
};

/// Scores a prediction vector against target, optionally after linear scaling.
FitnessValue score_predictions(std::span<const double> pred, std::span<const double> target, bool linear_scaling);

/// Training-split fitness. Each call to evaluate() costs one unit of budget.
class FitnessFunction {
public:
    FitnessFunction(const Template& tmpl, const DataMatrix& x, std::span<const double> y, bool linear_scaling,
                    EvaluationBudget& budget, Protection protection = Protection::Protected);

    /// Throws BudgetExhausted if no evaluation is left.
    FitnessValue evaluate(const Genotype& g, const ActivityMask& mask);
    FitnessValue evaluate(const Genotype& g) { return evaluate(g, compute_activity(g, tmpl_)); }

    const Template& tmpl() const noexcept { return tmpl_; }
    const DataMatrix& features() const noexcept { return x_; }
    std::span<const double> targets() const noexcept { return y_; }
    bool linear_scaling() const noexcept { return ls_; }
    EvaluationBudget& budget() noexcept { return budget_; }
    Protection protection() const noexcept { return interp_.protection(); }

private:
    const Template& tmpl_;
    const DataMatrix& x_;
    std::span<const double> y_;
    bool ls_;
    EvaluationBudget& budget_;
    Interpreter interp_;
    std::vector<double> pred_;
};

/// R^2 of a genotype on held-out data using a previously fitted scaling; does not touch any budget.
double holdout_r2(const Genotype& g, const Template& t, const LinearScaling& scaling, const DataMatrix& x,
                  std::span<const double> y, Protection protection = Protection::Protected);

} // namespace gomea
