#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "countthin/distributions.hpp"

namespace countthin {

enum class Layout { Dense, Sparse };

struct Triplet {
    std::size_t row;
    std::size_t col;
    Count value;
};

/**
 * @brief Cells-by-genes matrix of nonnegative integer counts.
 *
 * Dense storage is row-major. Sparse storage is compressed by row, which is
 * the sorted-(row, col) triplet form with no duplicates and no explicit zeros.
 */
class CountMatrix {
public:
    CountMatrix() = default;

    static CountMatrix zeros(std::size_t rows, std::size_t cols, Layout layout = Layout::Dense);
    static CountMatrix dense(std::size_t rows, std::size_t cols, std::vector<Count> row_major);

    /// Sorts the triplets, drops zeros, and rejects duplicate coordinates or out-of-range indices.
    static CountMatrix sparse(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

    /// Adopts compressed-row arrays. Validated: sorted unique columns per row, no zeros.
    static CountMatrix sparse_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                                  std::vector<std::uint32_t> col_index, std::vector<Count> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Layout layout() const noexcept { return layout_; }
    bool is_sparse() const noexcept { return layout_ == Layout::Sparse; }

    /// Stored entries: rows*cols for dense, structural nonzeros for sparse.
    std::size_t stored() const noexcept { return values_.size(); }
    std::size_t nonzeros() const noexcept;

    Count at(std::size_t row, std::size_t col) const;

    /// Row-major values; dense layout only.
    std::span<const Count> dense_values() const;
    std::span<Count> dense_values();

    std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const std::uint32_t> col_index() const noexcept { return col_index_; }
    std::span<const Count> values() const noexcept { return values_; }

    CountMatrix to_dense() const;
    CountMatrix to_sparse() const;
    CountMatrix with_layout(Layout layout) const;

    /// Calls f(row, col, value) for every nonzero entry in row-major order.
    template <typename F>
    void for_each_nonzero(F&& f) const {
        if (is_sparse()) {
            for (std::size_t i = 0; i < rows_; ++i) {
                for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                    f(i, static_cast<std::size_t>(col_index_[k]), values_[k]);
                }
            }
        } else {
            for (std::size_t i = 0; i < rows_; ++i) {
                for (std::size_t j = 0; j < cols_; ++j) {
                    const Count v = values_[i * cols_ + j];
                    if (v != 0) {
                        f(i, j, v);
                    }
                }
            }
        }
    }

    std::vector<Count> column(std::size_t col) const;
    std::vector<double> row_sums() const;
    std::vector<double> col_means() const;

    /// Rows [begin, end) as a new matrix with the same layout.
    CountMatrix slice_rows(std::size_t begin, std::size_t end) const;

    /// Selected columns, in the given order, same layout.
    CountMatrix select_cols(std::span<const std::size_t> cols) const;

    std::vector<std::string> row_names;
    std::vector<std::string> col_names;

    /// Same shape, layout and entries (names ignored).
    friend bool operator==(const CountMatrix& a, const CountMatrix& b);

    /// Same shape and entries, regardless of layout.
    friend bool same_entries(const CountMatrix& a, const CountMatrix& b);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Layout layout_ = Layout::Dense;
    std::vector<Count> values_;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_index_;
};

/// Entrywise sum; the result takes the layout of `a`.
CountMatrix add(const CountMatrix& a, const CountMatrix& b);

/// log(X + 1) as a dense row-major matrix of doubles.
std::vector<double> log1p_dense(const CountMatrix& x);

}  // namespace countthin
