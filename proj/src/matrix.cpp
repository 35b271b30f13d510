#include "countthin/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "countthin/errors.hpp"

namespace countthin {

namespace {

void check_index_width(std::size_t cols) {
    if (cols > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidInput("too many columns for sparse storage");
    }
}

}  // namespace

CountMatrix CountMatrix::zeros(std::size_t rows, std::size_t cols, Layout layout) {
    CountMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.layout_ = layout;
    if (layout == Layout::Dense) {
        m.values_.assign(rows * cols, 0);
    } else {
        check_index_width(cols);
        m.row_ptr_.assign(rows + 1, 0);
    }
    return m;
}

CountMatrix CountMatrix::dense(std::size_t rows, std::size_t cols, std::vector<Count> row_major) {
    if (row_major.size() != rows * cols) {
        throw InvalidInput("dense matrix: expected " + std::to_string(rows * cols) + " values, got " +
                           std::to_string(row_major.size()));
    }
    CountMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.layout_ = Layout::Dense;
    m.values_ = std::move(row_major);
    return m;
}

CountMatrix CountMatrix::sparse(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
    check_index_width(cols);
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CountMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.layout_ = Layout::Sparse;
    m.row_ptr_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triplets.size(); ++k) {
        const Triplet& t = triplets[k];
        if (t.row >= rows || t.col >= cols) {
            throw InvalidInput("sparse matrix: entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                               ") outside " + std::to_string(rows) + " x " + std::to_string(cols));
        }
        if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
            throw InvalidInput("sparse matrix: duplicate entry (" + std::to_string(t.row) + ", " +
                               std::to_string(t.col) + ")");
        }
        if (t.value == 0) {
            continue;
        }
        m.col_index_.push_back(static_cast<std::uint32_t>(t.col));
        m.values_.push_back(t.value);
        ++m.row_ptr_[t.row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) {
        m.row_ptr_[i + 1] += m.row_ptr_[i];
    }
    return m;
}

CountMatrix CountMatrix::sparse_csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                                    std::vector<std::uint32_t> col_index, std::vector<Count> values) {
    check_index_width(cols);
    if (row_ptr.size() != rows + 1 || row_ptr.front() != 0 || row_ptr.back() != values.size() ||
        col_index.size() != values.size()) {
        throw InvalidInput("sparse matrix: inconsistent compressed-row arrays");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (row_ptr[i] > row_ptr[i + 1]) {
            throw InvalidInput("sparse matrix: row pointers must be nondecreasing");
        }
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            if (col_index[k] >= cols || values[k] == 0 || (k > row_ptr[i] && col_index[k - 1] >= col_index[k])) {
                throw InvalidInput("sparse matrix: columns must be sorted, unique, in range, with no stored zeros");
            }
        }
    }
    CountMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.layout_ = Layout::Sparse;
    m.row_ptr_ = std::move(row_ptr);
    m.col_index_ = std::move(col_index);
    m.values_ = std::move(values);
    return m;
}

std::size_t CountMatrix::nonzeros() const noexcept {
    if (is_sparse()) {
        return values_.size();
    }
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](Count v) { return v != 0; }));
}

Count CountMatrix::at(std::size_t row, std::size_t col) const {
    if (row >= rows_ || col >= cols_) {
        throw InvalidInput("matrix index out of range");
    }
    if (!is_sparse()) {
        return values_[row * cols_ + col];
    }
    const auto first = col_index_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    const auto last = col_index_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
    if (it == last || *it != col) {
        return 0;
    }
    return values_[static_cast<std::size_t>(it - col_index_.begin())];
}

std::span<const Count> CountMatrix::dense_values() const {
    if (is_sparse()) {
        throw InvalidInput("dense_values() called on a sparse matrix");
    }
    return values_;
}

std::span<Count> CountMatrix::dense_values() {
    if (is_sparse()) {
        throw InvalidInput("dense_values() called on a sparse matrix");
    }
    return values_;
}

CountMatrix CountMatrix::to_dense() const {
    if (!is_sparse()) {
        return *this;
    }
    CountMatrix out = zeros(rows_, cols_, Layout::Dense);
    for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { out.values_[i * cols_ + j] = v; });
    out.row_names = row_names;
    out.col_names = col_names;
    return out;
}

CountMatrix CountMatrix::to_sparse() const {
    if (is_sparse()) {
        return *this;
    }
    check_index_width(cols_);
    CountMatrix out;
    out.rows_ = rows_;
    out.cols_ = cols_;
    out.layout_ = Layout::Sparse;
    out.row_ptr_.assign(rows_ + 1, 0);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            const Count v = values_[i * cols_ + j];
            if (v != 0) {
                out.col_index_.push_back(static_cast<std::uint32_t>(j));
                out.values_.push_back(v);
            }
        }
        out.row_ptr_[i + 1] = out.values_.size();
    }
    out.row_names = row_names;
    out.col_names = col_names;
    return out;
}

CountMatrix CountMatrix::with_layout(Layout layout) const {
    return layout == Layout::Dense ? to_dense() : to_sparse();
}

std::vector<Count> CountMatrix::column(std::size_t col) const {
    if (col >= cols_) {
        throw InvalidInput("column index out of range");
    }
    std::vector<Count> out(rows_, 0);
    if (is_sparse()) {
        for (std::size_t i = 0; i < rows_; ++i) {
            out[i] = at(i, col);
        }
    } else {
        for (std::size_t i = 0; i < rows_; ++i) {
            out[i] = values_[i * cols_ + col];
        }
    }
    return out;
}

std::vector<double> CountMatrix::row_sums() const {
    std::vector<double> out(rows_, 0.0);
    for_each_nonzero([&](std::size_t i, std::size_t, Count v) { out[i] += v; });
    return out;
}

std::vector<double> CountMatrix::col_means() const {
    std::vector<double> out(cols_, 0.0);
    for_each_nonzero([&](std::size_t, std::size_t j, Count v) { out[j] += v; });
    if (rows_ > 0) {
        for (double& v : out) {
            v /= static_cast<double>(rows_);
        }
    }
    return out;
}

CountMatrix CountMatrix::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) {
        throw InvalidInput("row slice out of range");
    }
    CountMatrix out;
    if (!is_sparse()) {
        std::vector<Count> vals(values_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                values_.begin() + static_cast<std::ptrdiff_t>(end * cols_));
        out = dense(end - begin, cols_, std::move(vals));
    } else {
        std::vector<std::size_t> ptr(end - begin + 1, 0);
        const std::size_t offset = row_ptr_[begin];
        for (std::size_t i = begin; i <= end; ++i) {
            ptr[i - begin] = row_ptr_[i] - offset;
        }
        std::vector<std::uint32_t> idx(col_index_.begin() + static_cast<std::ptrdiff_t>(offset),
                                       col_index_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[end]));
        std::vector<Count> vals(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                                values_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[end]));
        out = sparse_csr(end - begin, cols_, std::move(ptr), std::move(idx), std::move(vals));
    }
    if (!row_names.empty()) {
        out.row_names.assign(row_names.begin() + static_cast<std::ptrdiff_t>(begin),
                             row_names.begin() + static_cast<std::ptrdiff_t>(end));
    }
    out.col_names = col_names;
    return out;
}

CountMatrix CountMatrix::select_cols(std::span<const std::size_t> cols) const {
    for (std::size_t c : cols) {
        if (c >= cols_) {
            throw InvalidInput("column selection out of range");
        }
    }
    std::vector<Count> vals(rows_ * cols.size(), 0);
    const CountMatrix dense_self = to_dense();
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            vals[i * cols.size() + k] = dense_self.values_[i * cols_ + cols[k]];
        }
    }
    CountMatrix out = dense(rows_, cols.size(), std::move(vals));
    if (is_sparse()) {
        out = out.to_sparse();
    }
    out.row_names = row_names;
    if (!col_names.empty()) {
        for (std::size_t c : cols) {
            out.col_names.push_back(col_names[c]);
        }
    }
    return out;
}

bool operator==(const CountMatrix& a, const CountMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.layout_ == b.layout_ && a.values_ == b.values_ &&
           a.row_ptr_ == b.row_ptr_ && a.col_index_ == b.col_index_;
}

bool same_entries(const CountMatrix& a, const CountMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return false;
    }
    return a.to_sparse() == b.to_sparse();
}

CountMatrix add(const CountMatrix& a, const CountMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidInput("cannot add matrices of different shapes");
    }
    if (!a.is_sparse()) {
        CountMatrix out = a;
        auto dst = out.dense_values();
        b.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { dst[i * a.cols() + j] += v; });
        return out;
    }
    const CountMatrix bs = b.to_sparse();
    std::vector<std::size_t> ptr(a.rows() + 1, 0);
    std::vector<std::uint32_t> idx;
    std::vector<Count> vals;
    idx.reserve(a.stored() + bs.stored());
    vals.reserve(a.stored() + bs.stored());
    const auto ap = a.row_ptr();
    const auto ai = a.col_index();
    const auto av = a.values();
    const auto bp = bs.row_ptr();
    const auto bi = bs.col_index();
    const auto bv = bs.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::size_t ka = ap[i];
        std::size_t kb = bp[i];
        while (ka < ap[i + 1] || kb < bp[i + 1]) {
            if (kb >= bp[i + 1] || (ka < ap[i + 1] && ai[ka] < bi[kb])) {
                idx.push_back(ai[ka]);
                vals.push_back(av[ka++]);
            } else if (ka >= ap[i + 1] || bi[kb] < ai[ka]) {
                idx.push_back(bi[kb]);
                vals.push_back(bv[kb++]);
            } else {
                idx.push_back(ai[ka]);
                vals.push_back(av[ka++] + bv[kb++]);
            }
        }
        ptr[i + 1] = vals.size();
    }
    CountMatrix out = CountMatrix::sparse_csr(a.rows(), a.cols(), std::move(ptr), std::move(idx), std::move(vals));
    out.row_names = a.row_names;
    out.col_names = a.col_names;
    return out;
}

std::vector<double> log1p_dense(const CountMatrix& x) {
    std::vector<double> out(x.rows() * x.cols(), 0.0);
    x.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) {
        out[i * x.cols() + j] = std::log1p(static_cast<double>(v));
    });
    return out;
}

}  // namespace countthin
