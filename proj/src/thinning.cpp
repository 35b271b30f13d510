#include "countthin/thinning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "countthin/errors.hpp"

namespace countthin {

namespace {

constexpr std::size_t kStackFolds = 16;

// Splits one entry with a stack buffer for the concentration parameters.
inline void split_with_alphas(Count x, std::span<const double> eps, double b_prime, RngStream& rng,
                              std::span<Count> out) {
    if (x == 0) {
        std::fill(out.begin(), out.end(), Count{0});
        return;
    }
    if (b_prime == kInfinity) {
        sample_multinomial(x, eps, rng, out);
        return;
    }
    double alphas[kStackFolds];
    std::vector<double> heap;
    std::span<double> a;
    if (eps.size() <= kStackFolds) {
        a = std::span<double>(alphas, eps.size());
    } else {
        heap.resize(eps.size());
        a = heap;
    }
    for (std::size_t m = 0; m < eps.size(); ++m) {
        a[m] = eps[m] * b_prime;
    }
    sample_dirichlet_multinomial(x, a, rng, out);
}

// Builds M compressed-row folds from per-stored-entry split values (stride M).
std::vector<CountMatrix> assemble_sparse(const CountMatrix& x, std::size_t m_folds, const std::vector<Count>& parts) {
    const std::size_t rows = x.rows();
    const auto ptr = x.row_ptr();
    const auto idx = x.col_index();
    std::vector<CountMatrix> folds;
    folds.reserve(m_folds);
    for (std::size_t m = 0; m < m_folds; ++m) {
        std::vector<std::size_t> row_ptr(rows + 1, 0);
        for (std::size_t i = 0; i < rows; ++i) {
            std::size_t nz = 0;
            for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
                nz += parts[k * m_folds + m] != 0;
            }
            row_ptr[i + 1] = row_ptr[i] + nz;
        }
        std::vector<std::uint32_t> col(row_ptr[rows]);
        std::vector<Count> val(row_ptr[rows]);
        std::size_t w = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const Count v = parts[k * m_folds + m];
            if (v != 0) {
                col[w] = idx[k];
                val[w] = v;
                ++w;
            }
        }
        folds.push_back(CountMatrix::sparse_csr(rows, x.cols(), std::move(row_ptr), std::move(col), std::move(val)));
    }
    return folds;
}

std::vector<CountMatrix> assemble_dense(const CountMatrix& x, std::size_t m_folds, const std::vector<Count>& parts) {
    const std::size_t total = x.rows() * x.cols();
    std::vector<CountMatrix> folds;
    folds.reserve(m_folds);
    for (std::size_t m = 0; m < m_folds; ++m) {
        std::vector<Count> vals(total);
        for (std::size_t e = 0; e < total; ++e) {
            vals[e] = parts[e * m_folds + m];
        }
        folds.push_back(CountMatrix::dense(x.rows(), x.cols(), std::move(vals)));
    }
    return folds;
}

FoldSet make_foldset(const CountMatrix& x, const ThinPlan& plan, std::uint64_t seed, std::vector<CountMatrix> folds) {
    for (CountMatrix& f : folds) {
        f.row_names = x.row_names;
        f.col_names = x.col_names;
    }
    return FoldSet{std::move(folds), plan, seed};
}

}  // namespace

void ThinPlan::validate(std::size_t n_cols) const {
    if (eps.size() < 2) {
        throw InvalidParameter("a split needs at least two folds");
    }
    double sum = 0.0;
    for (double e : eps) {
        if (!(e > 0.0 && e < 1.0)) {
            throw InvalidParameter("fold weight " + std::to_string(e) + " is outside (0, 1)");
        }
        sum += e;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidParameter("fold weights sum to " + std::to_string(sum) + ", not 1");
    }
    if (b_prime.size() != 1 && b_prime.size() != n_cols) {
        throw InvalidParameter("b_prime has length " + std::to_string(b_prime.size()) + " but the matrix has " +
                               std::to_string(n_cols) + " columns");
    }
    for (double b : b_prime) {
        if (!(b > 0.0)) {
            throw InvalidParameter("b_prime must be positive or +inf, got " + std::to_string(b));
        }
    }
}

ThinPlan ThinPlan::equal(std::size_t m, std::vector<double> b_prime) {
    ThinPlan plan;
    plan.eps.assign(m, 1.0 / static_cast<double>(m));
    // 1/M * M can miss 1 by an ulp or two; absorb it in the last weight.
    double partial = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        partial += plan.eps[k];
    }
    if (m > 0) {
        plan.eps[m - 1] = 1.0 - partial;
    }
    plan.b_prime = std::move(b_prime);
    return plan;
}

void split_entry(Count x, std::span<const double> eps, double b_prime, RngStream& rng, std::span<Count> out) {
    if (out.size() != eps.size()) {
        throw InvalidInput("split_entry: output span does not match the number of folds");
    }
    split_with_alphas(x, eps, b_prime, rng, out);
}

FoldSet nb_count_split(const CountMatrix& x, const ThinPlan& plan, std::uint64_t seed) {
    plan.validate(x.cols());
    const std::size_t m_folds = plan.folds();
    const std::size_t cols = x.cols();
    const std::span<const double> eps = plan.eps;

    if (x.is_sparse()) {
        const auto ptr = x.row_ptr();
        const auto idx = x.col_index();
        const auto val = x.values();
        std::vector<Count> parts(val.size() * m_folds);
        const auto rows = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t i = 0; i < rows; ++i) {
            const auto row = static_cast<std::size_t>(i);
            for (std::size_t k = ptr[row]; k < ptr[row + 1]; ++k) {
                const std::size_t j = idx[k];
                RngStream rng = entry_stream(seed, row, j, cols);
                split_with_alphas(val[k], eps, plan.b_prime_for(j), rng,
                                  std::span<Count>(parts.data() + k * m_folds, m_folds));
            }
        }
        return make_foldset(x, plan, seed, assemble_sparse(x, m_folds, parts));
    }

    const auto values = x.dense_values();
    std::vector<Count> parts(values.size() * m_folds);
    const auto total = static_cast<std::int64_t>(values.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < total; ++e) {
        const auto entry = static_cast<std::size_t>(e);
        const std::size_t j = entry % cols;
        RngStream rng(seed, entry);
        split_with_alphas(values[entry], eps, plan.b_prime_for(j), rng,
                          std::span<Count>(parts.data() + entry * m_folds, m_folds));
    }
    return make_foldset(x, plan, seed, assemble_dense(x, m_folds, parts));
}

FoldSet poisson_count_split(const CountMatrix& x, std::vector<double> eps, std::uint64_t seed) {
    ThinPlan plan;
    plan.eps = std::move(eps);
    plan.b_prime = {kInfinity};
    return nb_count_split(x, plan, seed);
}

CountMatrix fold_complement(const FoldSet& folds, std::size_t m) {
    if (m >= folds.size()) {
        throw InvalidInput("fold index " + std::to_string(m) + " out of range for " + std::to_string(folds.size()) +
                           " folds");
    }
    CountMatrix out;
    bool first = true;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        if (k == m) {
            continue;
        }
        out = first ? folds[k] : add(out, folds[k]);
        first = false;
    }
    return out;
}

CountMatrix fold_total(const FoldSet& folds) {
    if (folds.size() == 0) {
        throw InvalidInput("empty fold set");
    }
    CountMatrix out = folds[0];
    for (std::size_t k = 1; k < folds.size(); ++k) {
        out = add(out, folds[k]);
    }
    return out;
}

namespace reference {

FoldSet nb_count_split(const CountMatrix& x, const ThinPlan& plan, std::uint64_t seed, bool reverse) {
    plan.validate(x.cols());
    const std::size_t m_folds = plan.folds();
    const std::size_t cols = x.cols();
    std::vector<Count> parts(x.stored() * m_folds);
    std::vector<Count> buffer(m_folds);

    // (row, col, storage slot) for every stored entry, in row-major order.
    struct Slot {
        std::size_t row, col, slot;
    };
    std::vector<Slot> slots;
    slots.reserve(x.stored());
    if (x.is_sparse()) {
        const auto ptr = x.row_ptr();
        const auto idx = x.col_index();
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
                slots.push_back({i, idx[k], k});
            }
        }
    } else {
        for (std::size_t e = 0; e < x.stored(); ++e) {
            slots.push_back({e / cols, e % cols, e});
        }
    }
    if (reverse) {
        std::reverse(slots.begin(), slots.end());
    }

    const auto values = x.values();
    for (const Slot& s : slots) {
        RngStream rng = entry_stream(seed, s.row, s.col, cols);
        split_entry(values[s.slot], plan.eps, plan.b_prime_for(s.col), rng, buffer);
        std::copy(buffer.begin(), buffer.end(), parts.begin() + static_cast<std::ptrdiff_t>(s.slot * m_folds));
    }

    auto folds = x.is_sparse() ? assemble_sparse(x, m_folds, parts) : assemble_dense(x, m_folds, parts);
    return make_foldset(x, plan, seed, std::move(folds));
}

}  // namespace reference

}  // namespace countthin
