#include "gomea/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace gomea {

using nlohmann::json;

namespace {

bool is_synthetic(const std::string& name)
{
    const auto names = synthetic_problem_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

/// JSON cannot hold infinities; they are written as strings.
json number(double v)
{
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string_view ims_kind_name(ImsEventKind k)
{
    switch (k) {
    case ImsEventKind::Created: return "created";
    case ImsEventKind::Generation: return "generation";
    case ImsEventKind::Terminated: return "terminated";
    }
    return "unknown";
}

} // namespace

void ExperimentConfig::validate() const
{
    LinkageConfig lc{measure, adjusted, {}};
    (void)lc.resolved_kind();
    const bool fixed = population.has_value() || generations.has_value();
    if (budget.has_value() == fixed) {
        throw ConfigError("specify either an evaluation budget or a fixed population size and generation count");
    }
    if (fixed && (!population || !generations)) {
        throw ConfigError("fixed mode needs both a population size and a generation count");
    }
    if (budget && *budget == 0) {
        throw ConfigError("the evaluation budget must be positive");
    }
    if (population && *population < 2) {
        throw ConfigError("the population size must be at least 2");
    }
    if (generations && *generations < 0) {
        throw ConfigError("the generation count cannot be negative");
    }
    if (height < 2) {
        throw ConfigError("the template height must be at least 2 levels");
    }
    if (run_index < 0) {
        throw ConfigError("the run index cannot be negative");
    }
}

std::string ExperimentConfig::dataset_label() const
{
    if (is_synthetic(dataset)) return dataset;
    return std::filesystem::path(dataset).stem().string();
}

std::string ExperimentConfig::run_name() const
{
    LinkageConfig lc{measure, adjusted, {}};
    return fmt::format("{}__{}__h{}__ls{}__s{}r{}", dataset_label(), measure_name(lc.resolved_kind()), height,
                       linear_scaling ? 1 : 0, master_seed, run_index);
}

Dataset resolve_dataset(const ExperimentConfig& config)
{
    if (is_synthetic(config.dataset)) {
        return synth_problem(config.dataset, config.synthetic_rows, config.synthetic_noise, config.data_seed);
    }
    CsvOptions opts = config.bike_sharing ? bike_sharing_options() : CsvOptions{};
    if (!config.target.empty()) opts.target = config.target;
    return load_csv(config.dataset, opts);
}

RunRecord run_experiment(const ExperimentConfig& config) { return run_experiment(config, resolve_dataset(config)); }

RunRecord run_experiment(const ExperimentConfig& config, const Dataset& data)
{
    config.validate();
    SplitPlan plan;
    plan.master_seed = config.master_seed;
    if (config.run_index >= plan.runs()) {
        throw ConfigError(fmt::format("run index {} exceeds the {} runs of the split protocol", config.run_index,
                                      plan.runs()));
    }
    const auto splits = make_splits(data.rows(), plan);
    const auto& split = splits[static_cast<std::size_t>(config.run_index)];
    const Dataset train = data.subset(split.train);
    const Dataset validation = data.subset(split.validation);
    const Dataset test = data.subset(split.test);

    const Template tmpl = build_template(config.template_depth(), 2);
    EvaluationBudget budget(config.budget.value_or(std::numeric_limits<std::uint64_t>::max()));
    FitnessFunction ff(tmpl, train.x, train.y, config.linear_scaling, budget, config.protection);

    EngineConfig ec;
    ec.height = config.template_depth();
    ec.operators = config.operators;
    ec.linkage = LinkageConfig{config.measure, config.adjusted, BinningRule{25, config.binning}};
    const auto [ymin, ymax] = std::minmax_element(train.y.begin(), train.y.end());
    GpGomea engine(ec, tmpl, ff, *ymin, *ymax);

    RunRecord record;
    record.config = config;
    if (config.budget_mode()) {
        auto ims = engine.run_ims(split.run_seed);
        record.ims_events = std::move(ims.events);
        record.initial_population_hash = ims.initial_population_hash;
    } else {
        auto fixed = engine.run_fixed(*config.population, *config.generations, split.run_seed);
        record.snapshots = std::move(fixed.snapshots);
        record.initial_population_hash = fixed.initial_population_hash;
        record.generations_completed = fixed.generations_completed;
        record.converged = fixed.converged;
    }

    const auto& tracker = engine.tracker();
    record.trace = tracker.trace();
    record.evaluations = budget.used();
    if (tracker.has_best()) {
        const auto& best = tracker.best();
        const auto& fit = tracker.best_fitness();
        record.expression = to_infix(best, tmpl);
        record.scores.train_r2 = fit.r2;
        record.scores.validation_r2 =
            holdout_r2(best, tmpl, fit.scaling, validation.x, validation.y, config.protection);
        record.scores.test_r2 = holdout_r2(best, tmpl, fit.scaling, test.x, test.y, config.protection);
        if (config.linear_scaling) {
            record.expression = fmt::format("{} + {} * {}", fit.scaling.intercept, fit.scaling.slope, record.expression);
        }
    }
    return record;
}

json config_to_json(const ExperimentConfig& c)
{
    LinkageConfig lc{c.measure, c.adjusted, {}};
    json j;
    j["dataset"] = c.dataset_label();
    j["measure"] = measure_name(lc.resolved_kind());
    j["height"] = c.height;
    j["linear_scaling"] = c.linear_scaling;
    j["operators"] = c.operators == OperatorSetKind::Base ? "base" : "extended";
    j["protection"] = c.protection == Protection::Protected ? "protected" : "analytic_quotient";
    j["binning"] = c.binning == BinningMode::EqualWidth ? "equal_width" : "equal_frequency";
    if (c.budget) {
        j["budget"] = *c.budget;
    } else {
        j["population"] = c.population.value_or(0);
        j["generations"] = c.generations.value_or(0);
    }
    j["master_seed"] = c.master_seed;
    j["run_index"] = c.run_index;
    return j;
}

std::string format_run_record(const RunRecord& r)
{
    std::string out;
    auto line = [&](const json& j) {
        out += j.dump();
        out += '\n';
    };

    json cfg = config_to_json(r.config);
    cfg["event"] = "config";
    line(cfg);
    line(json{{"event", "init"}, {"population_hash", hex64(r.initial_population_hash)}});
    for (const auto& e : r.ims_events) {
        json j{{"event", "ims"},
               {"kind", ims_kind_name(e.kind)},
               {"population", e.population},
               {"size", e.size},
               {"generation", e.generation},
               {"evaluations", e.evaluations},
               {"best_train_r2", number(e.best_r2)}};
        if (e.trigger_generation >= 0) j["trigger_generation"] = e.trigger_generation;
        if (!e.reason.empty()) j["reason"] = e.reason;
        line(j);
    }
    for (const auto& p : r.trace) {
        json j{{"event", "improvement"}, {"evaluations", p.evaluations}, {"best_train_r2", number(p.best_r2)}};
        if (r.config.record_timing) j["wall_ms"] = p.wall_ms;
        line(j);
    }
    json summary{{"event", "summary"},
                 {"name", r.config.run_name()},
                 {"evaluations", r.evaluations},
                 {"train_r2", number(r.scores.train_r2)},
                 {"validation_r2", number(r.scores.validation_r2)},
                 {"test_r2", number(r.scores.test_r2)},
                 {"expression", r.expression}};
    if (!r.config.budget_mode()) {
        summary["generations_completed"] = r.generations_completed;
        summary["converged"] = r.converged;
        summary["snapshots"] = r.snapshots.size();
    }
    line(summary);
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        }
        out << contents;
        if (!out.flush()) {
            throw std::runtime_error(fmt::format("failed writing '{}'", tmp.string()));
        }
    }
    std::filesystem::rename(tmp, path);
}

json read_run_summary(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    }
    std::string line, last;
    while (std::getline(in, line)) {
        if (!line.empty()) last = line;
    }
    auto j = json::parse(last);
    if (j.value("event", "") != "summary") {
        throw std::runtime_error(fmt::format("'{}' has no summary line", path.string()));
    }
    return j;
}

// ---------------------------------------------------------------------------

std::size_t worker_threads_from_env(std::size_t fallback)
{
    if (const char* v = std::getenv("GOMEA_SR_THREADS")) {
        std::size_t n = 0;
        const std::string_view s(v);
        auto r = std::from_chars(s.data(), s.data() + s.size(), n);
        if (r.ec == std::errc{} && n > 0) return n;
    }
    return fallback;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

std::vector<ExperimentConfig> expand_sweep(const SweepConfig& sweep)
{
    std::vector<ExperimentConfig> out;
    for (auto m : sweep.measures) {
        for (int h : sweep.heights) {
            for (bool ls : sweep.linear_scaling) {
                for (int r = 0; r < sweep.runs; ++r) {
                    ExperimentConfig c = sweep.base;
                    c.measure = m;
                    c.adjusted = false;
                    c.height = h;
                    c.linear_scaling = ls;
                    c.run_index = r;
                    out.push_back(c);
                }
            }
        }
    }
    return out;
}

SweepResult run_sweep(const SweepConfig& sweep)
{
    const auto configs = expand_sweep(sweep);
    for (const auto& c : configs) c.validate();
    const Dataset data = resolve_dataset(sweep.base);
    const auto& dir = sweep.base.output_dir;
    std::filesystem::create_directories(dir);

    SweepResult result;
    std::mutex mutex;
    parallel_for(configs.size(), sweep.threads, [&](std::size_t i) {
        const auto& c = configs[i];
        const auto path = dir / (c.run_name() + ".jsonl");
        if (std::filesystem::exists(path)) {
            std::lock_guard lock(mutex);
            result.skipped.push_back(path);
            return;
        }
        try {
            const auto record = run_experiment(c, data);
            write_file_atomic(path, format_run_record(record));
            std::lock_guard lock(mutex);
            result.completed.push_back(path);
        } catch (const std::exception& e) {
            write_file_atomic(dir / (c.run_name() + ".failed"), std::string(e.what()) + "\n");
            std::lock_guard lock(mutex);
            result.failed.emplace_back(path, e.what());
        }
    });
    std::sort(result.completed.begin(), result.completed.end());
    std::sort(result.skipped.begin(), result.skipped.end());
    std::sort(result.failed.begin(), result.failed.end());
    return result;
}

// ---------------------------------------------------------------------------

std::string similarity_to_csv(const SimilarityMatrix& s)
{
    std::string out;
    for (std::size_t j = 0; j < s.size(); ++j) {
        out += fmt::format("{}{}", j == 0 ? "" : ",", j);
    }
    out += '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            out += fmt::format("{}{}", j == 0 ? "" : ",", s(i, j));
        }
        out += '\n';
    }
    return out;
}

SimilarityMatrix similarity_from_csv(std::string_view text)
{
    std::vector<std::vector<double>> rows;
    std::size_t start = 0;
    bool header = true;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() : end + 1;
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> row;
        std::size_t p = 0;
        while (p <= line.size()) {
            auto q = line.find(',', p);
            auto cell = line.substr(p, q == std::string_view::npos ? std::string_view::npos : q - p);
            double v = 0.0;
            auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (r.ec != std::errc{}) throw std::runtime_error(fmt::format("bad similarity cell '{}'", cell));
            row.push_back(v);
            if (q == std::string_view::npos) break;
            p = q + 1;
        }
        rows.push_back(std::move(row));
    }
    SimilarityMatrix s(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw std::runtime_error("similarity CSV is not square");
        for (std::size_t j = 0; j < rows.size(); ++j) s(i, j) = rows[i][j];
    }
    return s;
}

std::optional<SimilarityMatrix> mean_snapshot(std::span<const std::vector<SimilarityMatrix>> runs, int generation)
{
    const auto g = static_cast<std::size_t>(generation);
    std::optional<SimilarityMatrix> acc;
    std::size_t count = 0;
    for (const auto& run : runs) {
        if (g >= run.size()) continue;
        const auto& m = run[g];
        if (!acc) acc = SimilarityMatrix(m.size(), 0.0);
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < m.size(); ++j) (*acc)(i, j) += m(i, j);
        ++count;
    }
    if (acc) {
        for (std::size_t i = 0; i < acc->size(); ++i)
            for (std::size_t j = 0; j < acc->size(); ++j) (*acc)(i, j) /= static_cast<double>(count);
    }
    return acc;
}

std::vector<SimilarityExport> collect_similarity(const SimilarityExportConfig& config)
{
    if (config.base.budget_mode()) {
        throw ConfigError("similarity export requires fixed mode (population and generations)");
    }
    const Dataset data = resolve_dataset(config.base);
    std::vector<SimilarityExport> out;
    for (auto m : config.measures) {
        SimilarityExport ex{m, {}, {}};
        ex.per_run.resize(static_cast<std::size_t>(config.runs));
        parallel_for(static_cast<std::size_t>(config.runs), config.threads, [&](std::size_t r) {
            ExperimentConfig c = config.base;
            c.measure = m;
            c.adjusted = false;
            c.run_index = static_cast<int>(r);
            ex.per_run[r] = run_experiment(c, data).snapshots;
        });
        for (int g : config.mean_generations) {
            if (auto mean = mean_snapshot(ex.per_run, g)) ex.means.emplace_back(g, std::move(*mean));
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<SimilarityExport> export_similarity(const SimilarityExportConfig& config)
{
    auto exports = collect_similarity(config);
    for (const auto& ex : exports) {
        const auto dir = config.base.output_dir / std::string(measure_name(ex.measure));
        for (std::size_t r = 0; r < ex.per_run.size(); ++r) {
            for (std::size_t g = 0; g < ex.per_run[r].size(); ++g) {
                write_file_atomic(dir / fmt::format("run{}_gen{}.csv", r, g), similarity_to_csv(ex.per_run[r][g]));
            }
        }
        for (const auto& [g, m] : ex.means) {
            write_file_atomic(dir / fmt::format("mean_gen{}.csv", g), similarity_to_csv(m));
        }
    }
    return exports;
}

} // namespace gomea
