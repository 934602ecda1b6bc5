#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gomea/fitness.hpp"
#include "gomea/linkage.hpp"
#include "gomea/random.hpp"
#include "gomea/template.hpp"

namespace gomea {

struct EngineConfig {
    int height = 5;
    OperatorSetKind operators = OperatorSetKind::Base;
    LinkageConfig linkage;
    /// Probability that the grow method places an operator at a non-leaf position.
    double grow_operator_probability = 0.5;
    std::size_t ims_base_size = 64;
    std::size_t ims_multiplier = 2;
    int ims_subgenerations = 10;
};

struct Population {
    Population(const LinkageConfig& linkage, const Template& tmpl, std::uint64_t seed)
        : learner(linkage, tmpl), seed(seed), rng(derive_seed(seed, {0x6c696e6b})) {}

    std::vector<Genotype> genotypes;
    std::vector<FitnessValue> fitness;
    std::vector<ActivityMask> masks;
    int generation = 0;
    LinkageLearner learner;
    std::uint64_t seed;
    Rng rng; ///< linkage-learning stream

    std::size_t size() const noexcept { return genotypes.size(); }
    double best_r2() const noexcept;
};

struct TracePoint {
    std::uint64_t evaluations = 0;
    double best_r2 = kWorstFitness;
    double wall_ms = 0.0;
};

/// Best-ever solution over every evaluation of a run.
class BestTracker {
public:
    BestTracker() : start_(std::chrono::steady_clock::now()) {}

    void observe(const Genotype& g, const FitnessValue& fv, std::uint64_t evaluations);

    bool has_best() const noexcept { return has_best_; }
    const Genotype& best() const noexcept { return best_; }
    const FitnessValue& best_fitness() const noexcept { return best_fitness_; }
    const std::vector<TracePoint>& trace() const noexcept { return trace_; }

private:
    std::chrono::steady_clock::time_point start_;
    bool has_best_ = false;
    Genotype best_;
    FitnessValue best_fitness_;
    std::vector<TracePoint> trace_;
};

/// One application of a FOS subset during GOM.
struct GomEvent {
    std::size_t offspring = 0;
    const Genotype* before = nullptr; ///< offspring before the donor copy
    const Genotype* after = nullptr;  ///< offspring right after the donor copy
    bool evaluated = false;
    bool reverted = false;
    double parent_r2 = kWorstFitness;
    double r2 = kWorstFitness; ///< fitness kept after the accept/revert decision
};
using GomObserver = std::function<void(const GomEvent&)>;

enum class ImsEventKind { Created, Generation, Terminated };

struct ImsEvent {
    ImsEventKind kind = ImsEventKind::Generation;
    int population = 0;
    std::size_t size = 0;
    int generation = 0;          ///< generations completed by this population
    int trigger_generation = -1; ///< for Created: generations completed by the predecessor
    std::uint64_t evaluations = 0;
    double best_r2 = kWorstFitness;
    std::string reason; ///< for Terminated: "converged" or "dominated"
};

struct ImsResult {
    std::vector<ImsEvent> events;
    std::uint64_t initial_population_hash = 0;
};

struct FixedResult {
    /// snapshots[g] is the similarity matrix learned on generation g's population.
    std::vector<SimilarityMatrix> snapshots;
    int generations_completed = 0;
    bool converged = false;
    std::uint64_t initial_population_hash = 0;
};

std::uint64_t population_hash(std::span<const Genotype> pop) noexcept;

/// True iff every individual has the same active expression.
bool has_converged(const Population& pop);

class GpGomea {
public:
    /// ERC values are drawn from U(erc_low, erc_high).
    GpGomea(const EngineConfig& config, const Template& tmpl, FitnessFunction& fitness, double erc_low,
            double erc_high);

    /// Half full / half grow with depths ramped over 1..height; each individual is evaluated once.
    Population init_half_and_half(std::size_t size, std::uint64_t seed);

    /// Gene-pool optimal mixing of every individual against the frozen parent population.
    void gom_step(Population& pop, const FOS& fos);

    /// Linkage learning followed by GOM.
    void run_generation(Population& pop);

    /// Interleaved multistart until the evaluation budget is spent.
    ImsResult run_ims(std::uint64_t seed);

    /// One population of the given size for a fixed number of generations.
    FixedResult run_fixed(std::size_t size, int generations, std::uint64_t seed);

    void set_observer(GomObserver observer) { observer_ = std::move(observer); }

    const BestTracker& tracker() const noexcept { return tracker_; }
    const Template& tmpl() const noexcept { return tmpl_; }
    const EngineConfig& config() const noexcept { return config_; }

private:
    FitnessValue evaluate(const Genotype& g, const ActivityMask& mask);
    Genotype random_genotype(Rng& rng, bool full, int depth_limit);
    Symbol random_terminal(Rng& rng);
    Symbol random_symbol(Rng& rng, bool leaf);

    EngineConfig config_;
    const Template& tmpl_;
    OperatorSet ops_;
    FitnessFunction& fitness_;
    double erc_low_;
    double erc_high_;
    BestTracker tracker_;
    GomObserver observer_;
};

} // namespace gomea
