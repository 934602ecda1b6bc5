#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gomea/data_matrix.hpp"

namespace gomea {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    DataMatrix x;
    std::vector<double> y;
    std::vector<std::string> feature_names;
    std::string provenance;

    std::size_t rows() const noexcept { return y.size(); }
    std::size_t features() const noexcept { return x.cols(); }

    /// Rows selected by index, in order.
    Dataset subset(std::span<const std::size_t> rows) const;
};

/// Throws DataError unless the dataset has >= 10 rows, only finite values and a non-constant target.
void validate_dataset(const Dataset& d);

struct CsvOptions {
    /// Target column by header name, or by zero-based index when numeric. Empty selects the last column.
    std::string target;
    /// Columns dropped before parsing.
    std::vector<std::string> drop_columns;
    /// Columns holding ISO dates (YYYY-MM-DD), converted to day of year in [1, 366].
    std::vector<std::string> date_columns;
};

/// Options matching the Bike Sharing (daily) file: date mapped to day of year, bookkeeping columns dropped.
CsvOptions bike_sharing_options();

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {}, std::string provenance = "<memory>");

int day_of_year(std::string_view iso_date);

struct SplitPlan {
    double test_fraction = 0.25;
    int folds = 5;
    int repeats = 6;
    std::uint64_t master_seed = 0;

    int runs() const noexcept { return folds * repeats; }
};

struct RunSplit {
    int run_index = 0;
    int repeat = 0;
    int fold = 0;
    std::uint64_t run_seed = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Held-out test set of floor(test_fraction*N) rows, then repeated k-fold CV over the remainder.
std::vector<RunSplit> make_splits(std::size_t rows, const SplitPlan& plan);

/// Seed shared by every configuration that uses the same master seed and run index.
std::uint64_t run_seed(std::uint64_t master_seed, int run_index);

/// Synthetic regression problems:
///   sin_plus_sqrt  y = sin(x0) + sqrt(|x1|),          x0 ~ U(-pi, pi), x1 ~ U(0, 4)
///   pagie          y = 1/(1+x0^-4) + 1/(1+x1^-4),     x ~ U(-5, 5)
///   airfoil_like   5 features on the Airfoil ranges (frequency, angle, chord, velocity, thickness),
///                  y = 125 - 3.2 ln(f/2000)^2 + 5 sin(a/7) - 30 c + 0.08 u - 120 t
/// Gaussian noise with standard deviation noise*std(y) is added.
Dataset synth_problem(const std::string& name, std::size_t rows, double noise, std::uint64_t seed);
std::vector<std::string> synthetic_problem_names();

} // namespace gomea
