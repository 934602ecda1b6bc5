#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gomea/dataio.hpp"
#include "gomea/engine.hpp"
#include "gomea/linkage.hpp"
#include "gomea/random.hpp"

namespace gomea {

struct ExperimentConfig {
    MeasureKind measure = MeasureKind::MIMasked;
    bool adjusted = false;
    /// Template height in levels: 5 gives the 31-node binary template.
    int height = 5;
    bool linear_scaling = false;
    OperatorSetKind operators = OperatorSetKind::Base;
    Protection protection = Protection::Protected;
    BinningMode binning = BinningMode::EqualWidth;

    /// Budget mode (interleaved multistart) when set; otherwise fixed mode.
    std::optional<std::uint64_t> budget;
    /// Fixed mode: one population of this size for this many generations.
    std::optional<std::size_t> population;
    std::optional<int> generations;

    /// CSV path, or the name of a synthetic problem.
    std::string dataset = "sin_plus_sqrt";
    std::string target;
    bool bike_sharing = false;
    std::size_t synthetic_rows = 500;
    double synthetic_noise = 0.0;
    std::uint64_t data_seed = 1;

    std::uint64_t master_seed = 0;
    int run_index = 0;
    std::filesystem::path output_dir = ".";
    bool record_timing = false;

    bool budget_mode() const noexcept { return budget.has_value(); }
    /// Depth of the leaves (edges from the root) of the template with `height` levels.
    int template_depth() const noexcept { return height - 1; }
    /// Throws ConfigError on an invalid combination.
    void validate() const;
    /// Name under which the dataset appears in records and filenames.
    std::string dataset_label() const;
    /// "<dataset>__<measure>__h<height>__ls<0|1>__s<seed>r<run>".
    std::string run_name() const;
};

struct HoldoutScores {
    double train_r2 = kWorstFitness;
    double validation_r2 = kWorstFitness;
    double test_r2 = kWorstFitness;
};

struct RunRecord {
    ExperimentConfig config;
    std::uint64_t initial_population_hash = 0;
    std::vector<TracePoint> trace;
    std::vector<ImsEvent> ims_events;
    std::vector<SimilarityMatrix> snapshots;
    HoldoutScores scores;
    std::string expression;
    std::uint64_t evaluations = 0;
    int generations_completed = 0;
    bool converged = false;
};

/// Loads a CSV file, or builds a synthetic problem when the name is one.
Dataset resolve_dataset(const ExperimentConfig& config);

/// Runs one experiment on the split selected by config.run_index.
RunRecord run_experiment(const ExperimentConfig& config, const Dataset& data);
RunRecord run_experiment(const ExperimentConfig& config);

nlohmann::json config_to_json(const ExperimentConfig& config);

/// Line-delimited JSON: config, init, [ims...], improvement..., summary.
std::string format_run_record(const RunRecord& record);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Reads the summary object (last line) of a run record file.
nlohmann::json read_run_summary(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct SweepConfig {
    ExperimentConfig base;
    std::vector<MeasureKind> measures;
    std::vector<int> heights;
    std::vector<bool> linear_scaling;
    int runs = 30;
    std::size_t threads = 1;
};

struct SweepResult {
    std::vector<std::filesystem::path> completed;
    std::vector<std::filesystem::path> skipped;
    std::vector<std::pair<std::filesystem::path, std::string>> failed;
};

std::vector<ExperimentConfig> expand_sweep(const SweepConfig& sweep);

/// Runs every missing record of the sweep; existing record files are left untouched.
SweepResult run_sweep(const SweepConfig& sweep);

/// Worker slots from GOMEA_SR_THREADS, else fallback.
std::size_t worker_threads_from_env(std::size_t fallback = 1);

/// Runs jobs [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job);

// ---------------------------------------------------------------------------

struct SimilarityExportConfig {
    ExperimentConfig base; ///< must be in fixed mode
    std::vector<MeasureKind> measures;
    int runs = 30;
    std::vector<int> mean_generations = {0, 5, 10, 20};
    std::size_t threads = 1;
};

/// Per measure: mean[g] is the element-wise mean over runs that reached generation g.
struct SimilarityExport {
    MeasureKind measure;
    std::vector<std::vector<SimilarityMatrix>> per_run; ///< [run][generation]
    std::vector<std::pair<int, SimilarityMatrix>> means;
};

std::vector<SimilarityExport> collect_similarity(const SimilarityExportConfig& config);
/// Writes <out>/<measure>/run<r>_gen<g>.csv and <out>/<measure>/mean_gen<g>.csv.
std::vector<SimilarityExport> export_similarity(const SimilarityExportConfig& config);

/// Mean over the snapshots at `generation`; nullopt if no run reached it.
std::optional<SimilarityMatrix> mean_snapshot(std::span<const std::vector<SimilarityMatrix>> runs, int generation);

std::string similarity_to_csv(const SimilarityMatrix& s);
SimilarityMatrix similarity_from_csv(std::string_view text);

// ---------------------------------------------------------------------------

class StatsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double stats_median(std::span<const double> values);
/// Mean after discarding the bottom and top floor(n/4) values.
double stats_iqm(std::span<const double> values);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval of the IQM (mean when fewer than 4 values).
ConfidenceInterval stats_bootstrap_ci(std::span<const double> values, double level, int resamples, Rng& rng);
/// Stratified variant: each group is resampled separately, then pooled.
ConfidenceInterval stats_bootstrap_ci(std::span<const std::vector<double>> groups, double level, int resamples,
                                      Rng& rng);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Upper-triangle (i < j) entries of a similarity matrix.
std::vector<double> off_diagonal(const SimilarityMatrix& s);

} // namespace gomea
