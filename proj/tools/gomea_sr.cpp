// Command-line driver: run, sweep, export-similarity, stats.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gomea/experiments.hpp"

using namespace gomea;

namespace {

struct CommonOptions {
    std::string measure = "mi_masked";
    bool adjusted = false;
    int height = 5;
    bool ls = false;
    std::string operators = "base";
    std::string protection = "protected";
    std::string binning = "equal_width";
    std::uint64_t budget = 0;
    std::size_t population = 0;
    int generations = -1;
    std::string dataset = "sin_plus_sqrt";
    std::string target;
    bool bike_sharing = false;
    std::size_t rows = 500;
    double noise = 0.0;
    std::uint64_t data_seed = 1;
    std::uint64_t seed = 0;
    int run = 0;
    std::string out = "results";
    bool timing = false;
    std::string config;
};

void add_common(CLI::App& app, CommonOptions& o, bool with_measure)
{
    app.add_option("--config", o.config, "Flat key=value file; command-line flags take precedence");
    if (with_measure) {
        app.add_option("--measure", o.measure, "Linkage measure")->capture_default_str();
        app.add_flag("--adjusted", o.adjusted, "Bias-adjust an MI measure against its generation-0 matrix");
        app.add_option("--height", o.height, "Template height in levels (5 = 31 nodes)")->capture_default_str();
        app.add_flag("--ls", o.ls, "Enable linear scaling");
    }
    app.add_option("--operators", o.operators, "Operator set: base or extended")->capture_default_str();
    app.add_option("--protection", o.protection, "protected or analytic_quotient")->capture_default_str();
    app.add_option("--binning", o.binning, "Constant binning: equal_width or equal_frequency")->capture_default_str();
    app.add_option("--budget", o.budget, "Evaluation budget (interleaved multistart mode)");
    app.add_option("--population", o.population, "Fixed population size");
    app.add_option("--generations", o.generations, "Fixed generation count");
    app.add_option("--dataset", o.dataset, "CSV file or synthetic problem name")->capture_default_str();
    app.add_option("--target", o.target, "Target column (name or zero-based index); default last");
    app.add_flag("--bike-sharing", o.bike_sharing, "Apply the Bike Sharing date/drop transform");
    app.add_option("--rows", o.rows, "Rows of a synthetic problem")->capture_default_str();
    app.add_option("--noise", o.noise, "Noise level of a synthetic problem")->capture_default_str();
    app.add_option("--data-seed", o.data_seed, "Seed of a synthetic problem")->capture_default_str();
    app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_flag("--timing", o.timing, "Record wall-clock milliseconds in traces");
}

template <typename Enum>
Enum pick(const std::string& value, std::initializer_list<std::pair<const char*, Enum>> choices, const char* what)
{
    for (const auto& [name, e] : choices) {
        if (value == name) return e;
    }
    throw ConfigError(fmt::format("unknown {} '{}'", what, value));
}

MeasureKind measure_or_throw(const std::string& name)
{
    if (auto m = parse_measure(name)) return *m;
    throw ConfigError(fmt::format("unknown measure '{}'", name));
}

// Fills options the command line left unset from a flat key=value file.
void apply_config(CLI::App& app, const std::string& path)
{
    if (path.empty()) return;
    if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config file '{}' not found", path));
    for (const auto& item : CLI::ConfigINI().from_file(path)) {
        if (!item.parents.empty() || item.name == "++" || item.name == "--") {
            throw ConfigError(fmt::format("config file '{}': sections are not supported", path));
        }
        auto* opt = app.get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config") {
            throw ConfigError(fmt::format("config file '{}': unknown key '{}'", path, item.name));
        }
        if (opt->count() > 0) continue;
        for (const auto& v : item.inputs) opt->add_result(v);
        opt->run_callback();
    }
}

ExperimentConfig to_config(const CommonOptions& o)
{
    ExperimentConfig c;
    c.measure = measure_or_throw(o.measure);
    c.adjusted = o.adjusted;
    c.height = o.height;
    c.linear_scaling = o.ls;
    c.operators = pick<OperatorSetKind>(o.operators, {{"base", OperatorSetKind::Base}, {"extended", OperatorSetKind::Extended}},
                                        "operator set");
    c.protection = pick<Protection>(
        o.protection, {{"protected", Protection::Protected}, {"analytic_quotient", Protection::AnalyticQuotient}},
        "protection policy");
    c.binning = pick<BinningMode>(
        o.binning, {{"equal_width", BinningMode::EqualWidth}, {"equal_frequency", BinningMode::EqualFrequency}},
        "binning rule");
    if (o.budget > 0) c.budget = o.budget;
    if (o.population > 0) c.population = o.population;
    if (o.generations >= 0) c.generations = o.generations;
    c.dataset = o.dataset;
    c.target = o.target;
    c.bike_sharing = o.bike_sharing;
    c.synthetic_rows = o.rows;
    c.synthetic_noise = o.noise;
    c.data_seed = o.data_seed;
    c.master_seed = o.seed;
    c.run_index = o.run;
    c.output_dir = o.out;
    c.record_timing = o.timing;
    return c;
}

std::vector<MeasureKind> parse_measures(const std::vector<std::string>& names)
{
    std::vector<MeasureKind> out;
    for (const auto& n : names) out.push_back(measure_or_throw(n));
    return out;
}

double as_double(const nlohmann::json& v)
{
    if (v.is_number()) return v.get<double>();
    return kWorstFitness;
}

int cmd_stats(const std::string& dir, int resamples, std::uint64_t seed)
{
    struct Group {
        std::vector<double> train, test;
    };
    std::map<std::string, Group> groups;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string first;
        std::getline(in, first);
        const auto cfg = nlohmann::json::parse(first);
        const auto summary = read_run_summary(f);
        const auto key = fmt::format("{} {} h{} ls{}", cfg.at("dataset").get<std::string>(),
                                     cfg.at("measure").get<std::string>(), cfg.at("height").get<int>(),
                                     cfg.at("linear_scaling").get<bool>() ? 1 : 0);
        groups[key].train.push_back(as_double(summary.at("train_r2")));
        groups[key].test.push_back(as_double(summary.at("test_r2")));
    }
    Rng rng(seed);
    std::cout << fmt::format("{:<44} {:>4} {:>10} {:>10} {:>21} {:>10}\n", "group", "n", "median", "iqm",
                             "iqm 95% ci", "test med");
    for (const auto& [key, g] : groups) {
        const double med = stats_median(g.train);
        std::string iqm = "-", ci = "-";
        if (g.train.size() >= 4) {
            iqm = fmt::format("{:.4f}", stats_iqm(g.train));
            const auto c = stats_bootstrap_ci(g.train, 0.95, resamples, rng);
            ci = fmt::format("[{:.4f}, {:.4f}]", c.lo, c.hi);
        }
        std::cout << fmt::format("{:<44} {:>4} {:>10.4f} {:>10} {:>21} {:>10.4f}\n", key, g.train.size(), med, iqm, ci,
                                 stats_median(g.test));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"GP-GOMEA symbolic regression with pluggable linkage measures"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    auto* run = app.add_subcommand("run", "Run one experiment and write its record");
    add_common(*run, run_opts, true);
    run->add_option("--run", run_opts.run, "Run index within the 30-run split protocol")->capture_default_str();

    CommonOptions sweep_opts;
    std::vector<std::string> sweep_measures{"random", "mi", "mi_adjusted", "mi_masked", "node", "node_static"};
    std::vector<int> sweep_heights{5};
    std::string sweep_ls = "off";
    int sweep_runs = 30;
    std::size_t threads = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a resumable matrix of experiments");
    add_common(*sweep, sweep_opts, false);
    sweep->add_option("--measures", sweep_measures, "Measures to sweep")->delimiter(',');
    sweep->add_option("--heights", sweep_heights, "Template heights in levels")->delimiter(',');
    sweep->add_option("--ls", sweep_ls, "Linear scaling: off, on or both")->capture_default_str();
    sweep->add_option("--runs", sweep_runs, "Runs per configuration (at most 30)")->capture_default_str();
    sweep->add_option("--threads", threads, "Worker slots (default: GOMEA_SR_THREADS or 1)");

    CommonOptions export_opts;
    export_opts.population = 1024;
    export_opts.generations = 20;
    export_opts.ls = true;
    std::vector<std::string> export_measures{"mi", "mi_adjusted", "mi_masked", "node"};
    int export_runs = 30;
    auto* exp = app.add_subcommand("export-similarity", "Export per-generation similarity matrices as CSV");
    add_common(*exp, export_opts, false);
    exp->add_option("--measures", export_measures, "Measures to export")->delimiter(',');
    exp->add_option("--height", export_opts.height, "Template height in levels (5 = 31 nodes)")->capture_default_str();
    exp->add_option("--linear-scaling", export_opts.ls, "Linear scaling (true/false)")->capture_default_str();
    exp->add_option("--runs", export_runs, "Runs to average")->capture_default_str();
    exp->add_option("--threads", threads, "Worker slots (default: GOMEA_SR_THREADS or 1)");

    std::string stats_dir = "results";
    int resamples = 2000;
    std::uint64_t stats_seed = 0;
    auto* stats = app.add_subcommand("stats", "Summarize the run records in a directory");
    stats->add_option("--dir", stats_dir, "Directory with .jsonl run records")->capture_default_str();
    stats->add_option("--resamples", resamples, "Bootstrap resamples")->capture_default_str();
    stats->add_option("--seed", stats_seed, "Bootstrap seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            apply_config(*run, run_opts.config);
            auto cfg = to_config(run_opts);
            cfg.validate();
            const auto record = run_experiment(cfg);
            const auto path = cfg.output_dir / (cfg.run_name() + ".jsonl");
            const auto text = format_run_record(record);
            write_file_atomic(path, text);
            std::cout << text.substr(text.rfind('\n', text.size() - 2) + 1);
        } else if (*sweep) {
            apply_config(*sweep, sweep_opts.config);
            SweepConfig sc;
            sc.base = to_config(sweep_opts);
            sc.measures = parse_measures(sweep_measures);
            sc.heights = sweep_heights;
            if (sweep_ls == "off") sc.linear_scaling = {false};
            else if (sweep_ls == "on") sc.linear_scaling = {true};
            else if (sweep_ls == "both") sc.linear_scaling = {false, true};
            else throw ConfigError(fmt::format("--ls must be off, on or both, not '{}'", sweep_ls));
            sc.runs = sweep_runs;
            sc.threads = threads > 0 ? threads : worker_threads_from_env();
            const auto res = run_sweep(sc);
            std::cout << fmt::format("completed {} skipped {} failed {}\n", res.completed.size(), res.skipped.size(),
                                     res.failed.size());
            for (const auto& [p, msg] : res.failed) std::cerr << p.string() << ": " << msg << '\n';
            return res.failed.empty() ? 0 : 1;
        } else if (*exp) {
            apply_config(*exp, export_opts.config);
            SimilarityExportConfig ec;
            ec.base = to_config(export_opts);
            ec.measures = parse_measures(export_measures);
            ec.runs = export_runs;
            ec.threads = threads > 0 ? threads : worker_threads_from_env();
            ec.base.validate();
            const auto exports = export_similarity(ec);
            for (const auto& ex : exports) {
                std::cout << fmt::format("{}: {} runs, means at", measure_name(ex.measure), ex.per_run.size());
                for (const auto& [g, m] : ex.means) std::cout << ' ' << g;
                std::cout << '\n';
            }
        } else if (*stats) {
            return cmd_stats(stats_dir, resamples, stats_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
