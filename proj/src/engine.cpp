#include "gomea/engine.hpp"

#include <algorithm>
#include <bit>
#include <memory>
#include <numeric>

namespace gomea {

double Population::best_r2() const noexcept
{
    double best = kWorstFitness;
    for (const auto& f : fitness) best = std::max(best, f.r2);
    return best;
}

void BestTracker::observe(const Genotype& g, const FitnessValue& fv, std::uint64_t evaluations)
{
    if (has_best_ && !(fv.r2 > best_fitness_.r2)) {
        return;
    }
    const bool first = !has_best_;
    has_best_ = true;
    best_ = g;
    best_fitness_ = fv;
    if (first && fv.r2 == kWorstFitness) {
        return;
    }
    const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
    trace_.push_back({evaluations, fv.r2, elapsed.count()});
}

std::uint64_t population_hash(std::span<const Genotype> pop) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t w) {
        for (int b = 0; b < 8; ++b) {
            h ^= (w >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& g : pop) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            mix((static_cast<std::uint64_t>(g.symbols[i].kind) << 16) | g.symbols[i].index);
            if (g.symbols[i].kind == SymbolKind::Constant) {
                mix(std::bit_cast<std::uint64_t>(g.constants[i]));
            }
        }
    }
    return h;
}

bool has_converged(const Population& pop)
{
    for (std::size_t i = 1; i < pop.size(); ++i) {
        if (!same_active_parts(pop.genotypes[0], pop.masks[0], pop.genotypes[i], pop.masks[i])) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

GpGomea::GpGomea(const EngineConfig& config, const Template& tmpl, FitnessFunction& fitness, double erc_low,
                 double erc_high)
    : config_(config), tmpl_(tmpl), ops_(OperatorSet::make(config.operators)), fitness_(fitness),
      erc_low_(std::min(erc_low, erc_high)), erc_high_(std::max(erc_low, erc_high))
{
    if (tmpl.height() != config.height) {
        throw ConfigError("engine height does not match the template");
    }
    if (tmpl.max_arity() < ops_.max_arity()) {
        throw ConfigError("template arity is smaller than the operator set's maximum arity");
    }
    // Rejects masked + adjusted before any work is done.
    (void)config.linkage.resolved_kind();
}

FitnessValue GpGomea::evaluate(const Genotype& g, const ActivityMask& mask)
{
    auto fv = fitness_.evaluate(g, mask);
    tracker_.observe(g, fv, fitness_.budget().used());
    return fv;
}

Symbol GpGomea::random_terminal(Rng& rng)
{
    const std::size_t n_features = fitness_.features().cols();
    const std::size_t pick = uniform_index(rng, n_features + 1);
    return pick < n_features ? Symbol::feature(pick) : Symbol::constant();
}

Symbol GpGomea::random_symbol(Rng& rng, bool leaf)
{
    if (leaf) {
        return random_terminal(rng);
    }
    const std::size_t n_features = fitness_.features().cols();
    const std::size_t pick = uniform_index(rng, ops_.size() + n_features + 1);
    if (pick < ops_.size()) {
        return Symbol::op(ops_.operators()[pick].op);
    }
    const std::size_t t = pick - ops_.size();
    return t < n_features ? Symbol::feature(t) : Symbol::constant();
}

Genotype GpGomea::random_genotype(Rng& rng, bool full, int depth_limit)
{
    const std::size_t n = tmpl_.size();
    Genotype g;
    g.symbols.resize(n);
    g.constants.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int depth = tmpl_.depth(i);
        Symbol s;
        if (depth < depth_limit) {
            const bool place_op = full || uniform01(rng) < config_.grow_operator_probability;
            s = place_op ? Symbol::op(ops_.operators()[uniform_index(rng, ops_.size())].op) : random_terminal(rng);
        } else if (depth == depth_limit) {
            s = random_terminal(rng);
        } else {
            // Beyond the ramped depth: never active, filled from the alphabet legal at this position.
            s = random_symbol(rng, tmpl_.is_leaf(i));
        }
        g.symbols[i] = s;
        if (s.kind == SymbolKind::Constant) {
            g.constants[i] = erc_high_ > erc_low_ ? std::uniform_real_distribution<double>(erc_low_, erc_high_)(rng)
                                                  : erc_low_;
        }
    }
    return g;
}

Population GpGomea::init_half_and_half(std::size_t size, std::uint64_t seed)
{
    if (size < 2) {
        throw ConfigError("population size must be at least 2");
    }
    Population pop(config_.linkage, tmpl_, seed);
    Rng rng(derive_seed(seed, {0x696e6974}));
    pop.genotypes.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        const bool full = k < size / 2;
        const int depth = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(tmpl_.height())));
        pop.genotypes.push_back(random_genotype(rng, full, depth));
    }
    pop.masks.reserve(size);
    for (const auto& g : pop.genotypes) {
        pop.masks.push_back(compute_activity(g, tmpl_));
    }
    pop.fitness.reserve(size);
    for (std::size_t k = 0; k < size; ++k) {
        pop.fitness.push_back(evaluate(pop.genotypes[k], pop.masks[k]));
    }
    return pop;
}

void GpGomea::gom_step(Population& pop, const FOS& fos)
{
    const std::size_t n = pop.size();
    const std::vector<Genotype> parents = pop.genotypes;

    std::vector<std::size_t> order(fos.subsets.size());
    std::vector<Symbol> saved_symbols;
    std::vector<double> saved_constants;
    Genotype before;

    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(pop.seed, {0x676f6d, static_cast<std::uint64_t>(pop.generation), i}));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);

        Genotype& child = pop.genotypes[i];
        ActivityMask& mask = pop.masks[i];
        FitnessValue& fit = pop.fitness[i];

        for (std::size_t s : order) {
            const auto& subset = fos.subsets[s];
            std::size_t donor = uniform_index(rng, n - 1);
            if (donor >= i) ++donor;
            const Genotype& src = parents[donor];

            if (observer_) before = child;
            saved_symbols.clear();
            saved_constants.clear();
            for (auto v : subset) {
                saved_symbols.push_back(child.symbols[v]);
                saved_constants.push_back(child.constants[v]);
                child.symbols[v] = src.symbols[v];
                child.constants[v] = src.constants[v];
            }

            auto new_mask = compute_activity(child, tmpl_);
            bool changed = new_mask != mask;
            if (!changed) {
                for (std::size_t k = 0; k < subset.size(); ++k) {
                    const auto v = subset[k];
                    if (!mask[v]) continue;
                    if (saved_symbols[k] != child.symbols[v] ||
                        (child.symbols[v].kind == SymbolKind::Constant &&
                         std::bit_cast<std::uint64_t>(saved_constants[k]) !=
                             std::bit_cast<std::uint64_t>(child.constants[v]))) {
                        changed = true;
                        break;
                    }
                }
            }

            GomEvent ev;
            ev.offspring = i;
            ev.parent_r2 = fit.r2;
            if (changed) {
                FitnessValue fv;
                try {
                    fv = evaluate(child, new_mask);
                } catch (const BudgetExhausted&) {
                    for (std::size_t k = 0; k < subset.size(); ++k) {
                        child.symbols[subset[k]] = saved_symbols[k];
                        child.constants[subset[k]] = saved_constants[k];
                    }
                    throw;
                }
                ev.evaluated = true;
                if (observer_) {
                    ev.before = &before;
                    ev.after = &child;
                }
                if (fv.r2 < fit.r2) {
                    ev.reverted = true;
                    if (observer_) {
                        ev.r2 = fit.r2;
                        observer_(ev);
                    }
                    for (std::size_t k = 0; k < subset.size(); ++k) {
                        child.symbols[subset[k]] = saved_symbols[k];
                        child.constants[subset[k]] = saved_constants[k];
                    }
                    continue;
                }
                fit = fv;
                mask = std::move(new_mask);
            }
            if (observer_) {
                ev.before = &before;
                ev.after = &child;
                ev.r2 = fit.r2;
                observer_(ev);
            }
        }
    }
}

void GpGomea::run_generation(Population& pop)
{
    const FOS& fos = pop.learner.learn(pop.genotypes, pop.masks, pop.rng);
    try {
        gom_step(pop, fos);
    } catch (const BudgetExhausted&) {
        ++pop.generation;
        throw;
    }
    ++pop.generation;
}

// ---------------------------------------------------------------------------

ImsResult GpGomea::run_ims(std::uint64_t seed)
{
    if (fitness_.budget().limit() == std::numeric_limits<std::uint64_t>::max()) {
        throw ConfigError("the interleaved multistart scheme requires a finite evaluation budget");
    }
    ImsResult result;
    std::vector<std::unique_ptr<Population>> pops;
    std::vector<bool> alive;

    auto emit = [&](ImsEventKind kind, int k, int trigger, std::string reason = {}) {
        ImsEvent ev;
        ev.kind = kind;
        ev.population = k;
        ev.size = pops[static_cast<std::size_t>(k)]->size();
        ev.generation = pops[static_cast<std::size_t>(k)]->generation;
        ev.trigger_generation = trigger;
        ev.evaluations = fitness_.budget().used();
        ev.best_r2 = pops[static_cast<std::size_t>(k)]->best_r2();
        ev.reason = std::move(reason);
        result.events.push_back(std::move(ev));
    };

    auto terminate_dominated = [&](int k) {
        const double best = pops[static_cast<std::size_t>(k)]->best_r2();
        for (int j = 0; j < k; ++j) {
            if (alive[static_cast<std::size_t>(j)] && best > pops[static_cast<std::size_t>(j)]->best_r2()) {
                alive[static_cast<std::size_t>(j)] = false;
                emit(ImsEventKind::Terminated, j, -1, "dominated");
            }
        }
    };

    auto create = [&](int trigger) {
        const int k = static_cast<int>(pops.size());
        std::size_t size = config_.ims_base_size;
        for (int i = 0; i < k; ++i) size *= config_.ims_multiplier;
        auto pop = init_half_and_half(size, derive_seed(seed, {0x706f70, static_cast<std::uint64_t>(k)}));
        pops.push_back(std::make_unique<Population>(std::move(pop)));
        alive.push_back(true);
        if (k == 0) result.initial_population_hash = population_hash(pops.back()->genotypes);
        emit(ImsEventKind::Created, k, trigger);
        terminate_dominated(k);
    };

    std::function<void(int)> step = [&](int k) {
        auto& pop = *pops[static_cast<std::size_t>(k)];
        run_generation(pop);
        emit(ImsEventKind::Generation, k, -1);
        terminate_dominated(k);
        if (has_converged(pop)) {
            alive[static_cast<std::size_t>(k)] = false;
            emit(ImsEventKind::Terminated, k, -1, "converged");
            return;
        }
        if (pop.generation % config_.ims_subgenerations != 0) {
            return;
        }
        // Hand one generation to the next larger live population, creating it if needed.
        for (int j = k + 1;; ++j) {
            if (j == static_cast<int>(pops.size())) {
                create(pop.generation);
                return;
            }
            if (alive[static_cast<std::size_t>(j)]) {
                step(j);
                return;
            }
        }
    };

    try {
        create(-1);
        while (true) {
            auto it = std::find(alive.begin(), alive.end(), true);
            if (it == alive.end()) {
                create(-1);
                continue;
            }
            step(static_cast<int>(it - alive.begin()));
        }
    } catch (const BudgetExhausted&) {
        // Normal termination.
    }
    return result;
}

FixedResult GpGomea::run_fixed(std::size_t size, int generations, std::uint64_t seed)
{
    FixedResult result;
    Population pop = init_half_and_half(size, seed);
    result.initial_population_hash = population_hash(pop.genotypes);
    for (int g = 0; g <= generations; ++g) {
        if (g > 0 && has_converged(pop)) {
            result.converged = true;
            break;
        }
        const FOS& fos = pop.learner.learn(pop.genotypes, pop.masks, pop.rng);
        if (pop.learner.has_similarity()) {
            result.snapshots.push_back(pop.learner.last_similarity());
        }
        if (g == generations) {
            break;
        }
        gom_step(pop, fos);
        ++pop.generation;
        result.generations_completed = pop.generation;
    }
    return result;
}

} // namespace gomea
