#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gomea {

/// Column-major feature matrix. Column f occupies values[f*rows, (f+1)*rows).
class DataMatrix {
public:
    DataMatrix() = default;
    DataMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const double> column(std::size_t f) const { return {values_.data() + f * rows_, rows_}; }
    std::span<double> column(std::size_t f) { return {values_.data() + f * rows_, rows_}; }

    double operator()(std::size_t row, std::size_t col) const { return values_[col * rows_ + row]; }
    double& operator()(std::size_t row, std::size_t col) { return values_[col * rows_ + row]; }

    /// Copies the given rows, in order, into a new matrix.
    DataMatrix select_rows(std::span<const std::size_t> rows) const
    {
        DataMatrix out(rows.size(), cols_);
        for (std::size_t f = 0; f < cols_; ++f) {
            auto src = column(f);
            auto dst = out.column(f);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r] >= rows_) {
                    throw std::out_of_range("DataMatrix::select_rows: row index out of range");
                }
                dst[r] = src[rows[r]];
            }
        }
        return out;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

} // namespace gomea
