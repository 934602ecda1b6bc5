#include "gomea/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "gomea/fitness.hpp"
#include "gomea/random.hpp"

namespace gomea {

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Dataset out;
    out.x = x.select_rows(rows);
    out.y.reserve(rows.size());
    for (auto r : rows) out.y.push_back(y.at(r));
    out.feature_names = feature_names;
    out.provenance = provenance;
    return out;
}

void validate_dataset(const Dataset& d)
{
    if (d.rows() < 10) {
        throw DataError(fmt::format("{}: at least 10 rows are required, got {}", d.provenance, d.rows()));
    }
    if (d.x.rows() != d.rows()) {
        throw DataError(fmt::format("{}: feature and target row counts differ", d.provenance));
    }
    for (std::size_t f = 0; f < d.features(); ++f) {
        auto col = d.x.column(f);
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (!std::isfinite(col[r])) {
                throw DataError(fmt::format("{}: non-finite value in row {}, feature {}", d.provenance, r, f));
            }
        }
    }
    for (std::size_t r = 0; r < d.rows(); ++r) {
        if (!std::isfinite(d.y[r])) {
            throw DataError(fmt::format("{}: non-finite target in row {}", d.provenance, r));
        }
    }
    if (!(variance(d.y) > 0.0)) {
        throw DataError(fmt::format("{}: target has zero variance", d.provenance));
    }
}

CsvOptions bike_sharing_options()
{
    CsvOptions o;
    o.target = "cnt";
    o.drop_columns = {"instant", "casual", "registered"};
    o.date_columns = {"dteday"};
    return o;
}

int day_of_year(std::string_view iso_date)
{
    int y = 0, m = 0, d = 0;
    auto parse = [&](std::size_t pos, std::size_t len, int& out) {
        if (pos + len > iso_date.size()) return false;
        auto r = std::from_chars(iso_date.data() + pos, iso_date.data() + pos + len, out);
        return r.ec == std::errc{} && r.ptr == iso_date.data() + pos + len;
    };
    if (iso_date.size() != 10 || iso_date[4] != '-' || iso_date[7] != '-' || !parse(0, 4, y) || !parse(5, 2, m) ||
        !parse(8, 2, d) || m < 1 || m > 12 || d < 1 || d > 31) {
        throw DataError(fmt::format("invalid ISO date '{}'", iso_date));
    }
    static constexpr int kCumulative[] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
    const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    return kCumulative[m - 1] + d + ((leap && m > 2) ? 1 : 0);
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_line(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool contains(const std::vector<std::string>& v, std::string_view s)
{
    return std::find(v.begin(), v.end(), s) != v.end();
}

} // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options, std::string provenance)
{
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start < text.size()) {
            auto pos = text.find('\n', start);
            auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
            if (!trim(line).empty()) lines.push_back(line);
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
    }
    if (lines.empty()) {
        throw DataError(fmt::format("{}: empty file", provenance));
    }
    // Strip a UTF-8 byte order mark.
    if (lines[0].starts_with("\xEF\xBB\xBF")) lines[0].remove_prefix(3);

    const auto header = split_line(lines[0]);
    const std::size_t ncols = header.size();

    std::size_t target = ncols - 1;
    if (!options.target.empty()) {
        auto it = std::find(header.begin(), header.end(), options.target);
        if (it != header.end()) {
            target = static_cast<std::size_t>(it - header.begin());
        } else {
            std::size_t idx = 0;
            auto r = std::from_chars(options.target.data(), options.target.data() + options.target.size(), idx);
            if (r.ec != std::errc{} || r.ptr != options.target.data() + options.target.size() || idx >= ncols) {
                throw DataError(fmt::format("{}: target column '{}' not found", provenance, options.target));
            }
            target = idx;
        }
    }

    std::vector<std::size_t> feature_cols;
    Dataset d;
    d.provenance = std::move(provenance);
    for (std::size_t c = 0; c < ncols; ++c) {
        if (c == target || contains(options.drop_columns, header[c])) continue;
        feature_cols.push_back(c);
        d.feature_names.emplace_back(header[c]);
    }

    const std::size_t nrows = lines.size() - 1;
    d.x = DataMatrix(nrows, feature_cols.size());
    d.y.resize(nrows);
    for (std::size_t r = 0; r < nrows; ++r) {
        const auto cells = split_line(lines[r + 1]);
        if (cells.size() != ncols) {
            throw DataError(fmt::format("{}: row {} has {} cells, expected {}", d.provenance, r + 2, cells.size(), ncols));
        }
        auto parse_cell = [&](std::size_t c) {
            const auto cell = cells[c];
            if (contains(options.date_columns, header[c])) {
                try {
                    return static_cast<double>(day_of_year(cell));
                } catch (const DataError&) {
                    throw DataError(fmt::format("{}: row {}, column '{}': invalid date '{}'", d.provenance, r + 2,
                                                header[c], cell));
                }
            }
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw DataError(fmt::format("{}: row {}, column '{}': cannot parse '{}' as a number", d.provenance,
                                            r + 2, header[c], cell));
            }
            if (!std::isfinite(v)) {
                throw DataError(fmt::format("{}: row {}, column '{}': non-finite value '{}'", d.provenance, r + 2,
                                            header[c], cell));
            }
            return v;
        };
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            d.x(r, f) = parse_cell(feature_cols[f]);
        }
        d.y[r] = parse_cell(target);
    }
    validate_dataset(d);
    return d;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), options, path.filename().string());
}

// ---------------------------------------------------------------------------

std::uint64_t run_seed(std::uint64_t master_seed, int run_index)
{
    return derive_seed(master_seed, {0x72756e, static_cast<std::uint64_t>(run_index)});
}

std::vector<RunSplit> make_splits(std::size_t rows, const SplitPlan& plan)
{
    if (plan.folds < 2 || plan.repeats < 1 || plan.test_fraction < 0.0 || plan.test_fraction >= 1.0) {
        throw std::invalid_argument("make_splits: invalid split plan");
    }
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng test_rng(derive_seed(plan.master_seed, {0x74657374}));
    std::shuffle(order.begin(), order.end(), test_rng);

    const auto n_test = static_cast<std::size_t>(std::floor(plan.test_fraction * static_cast<double>(rows)));
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test.begin(), test.end());
    std::sort(rest.begin(), rest.end());

    const auto k = static_cast<std::size_t>(plan.folds);
    std::vector<RunSplit> splits;
    for (int r = 0; r < plan.repeats; ++r) {
        auto perm = rest;
        Rng rng(derive_seed(plan.master_seed, {0x666f6c64, static_cast<std::uint64_t>(r)}));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t lo = f * perm.size() / k;
            const std::size_t hi = (f + 1) * perm.size() / k;
            RunSplit s;
            s.repeat = r;
            s.fold = static_cast<int>(f);
            s.run_index = r * plan.folds + static_cast<int>(f);
            s.run_seed = run_seed(plan.master_seed, s.run_index);
            s.test = test;
            for (std::size_t i = 0; i < perm.size(); ++i) {
                (i >= lo && i < hi ? s.validation : s.train).push_back(perm[i]);
            }
            std::sort(s.train.begin(), s.train.end());
            std::sort(s.validation.begin(), s.validation.end());
            splits.push_back(std::move(s));
        }
    }
    return splits;
}

// ---------------------------------------------------------------------------

std::vector<std::string> synthetic_problem_names() { return {"sin_plus_sqrt", "pagie", "airfoil_like"}; }

Dataset synth_problem(const std::string& name, std::size_t rows, double noise, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, {0x73796e7468}));
    Dataset d;
    d.provenance = fmt::format("synthetic:{}", name);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    if (name == "sin_plus_sqrt") {
        d.x = DataMatrix(rows, 2);
        d.y.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            d.x(r, 0) = uniform(-std::numbers::pi, std::numbers::pi);
            d.x(r, 1) = uniform(0.0, 4.0);
            d.y[r] = std::sin(d.x(r, 0)) + std::sqrt(std::abs(d.x(r, 1)));
        }
        d.feature_names = {"x0", "x1"};
    } else if (name == "pagie") {
        d.x = DataMatrix(rows, 2);
        d.y.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            d.x(r, 0) = uniform(-5.0, 5.0);
            d.x(r, 1) = uniform(-5.0, 5.0);
            d.y[r] = 1.0 / (1.0 + std::pow(d.x(r, 0), -4.0)) + 1.0 / (1.0 + std::pow(d.x(r, 1), -4.0));
        }
        d.feature_names = {"x0", "x1"};
    } else if (name == "airfoil_like") {
        d.x = DataMatrix(rows, 5);
        d.y.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const double freq = std::exp(uniform(std::log(200.0), std::log(20000.0)));
            const double angle = uniform(0.0, 22.2);
            const double chord = uniform(0.0254, 0.3048);
            const double velocity = uniform(31.7, 71.3);
            const double thickness = uniform(0.0004, 0.0584);
            d.x(r, 0) = freq;
            d.x(r, 1) = angle;
            d.x(r, 2) = chord;
            d.x(r, 3) = velocity;
            d.x(r, 4) = thickness;
            const double lf = std::log(freq / 2000.0);
            d.y[r] = 125.0 - 3.2 * lf * lf + 5.0 * std::sin(angle / 7.0) - 30.0 * chord + 0.08 * velocity -
                     120.0 * thickness;
        }
        d.feature_names = {"frequency", "angle", "chord", "velocity", "thickness"};
    } else {
        throw DataError(fmt::format("unknown synthetic problem '{}'", name));
    }

    if (noise > 0.0) {
        const double sd = noise * std::sqrt(variance(d.y));
        std::normal_distribution<double> gauss(0.0, sd);
        for (auto& v : d.y) v += gauss(rng);
    }
    validate_dataset(d);
    return d;
}

} // namespace gomea
