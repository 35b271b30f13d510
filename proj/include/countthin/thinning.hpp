#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "countthin/distributions.hpp"
#include "countthin/matrix.hpp"

namespace countthin {

/**
 * @brief Parameters of a count split.
 *
 * `eps` holds the M fold weights; `b_prime` holds the thinning overdispersion
 * per column, or a single value broadcast to every column. `kInfinity` in
 * `b_prime` selects the multinomial (Poisson) path for that column.
 */
struct ThinPlan {
    std::vector<double> eps;
    std::vector<double> b_prime{kInfinity};

    std::size_t folds() const noexcept { return eps.size(); }
    double b_prime_for(std::size_t col) const noexcept { return b_prime.size() == 1 ? b_prime[0] : b_prime[col]; }

    /**
     * Throws InvalidParameter if M < 2, some eps is outside (0, 1), the eps do
     * not sum to one within 1e-12 (no renormalization), some b' is not positive,
     * or `b_prime` is neither scalar nor of length `n_cols`.
     */
    void validate(std::size_t n_cols) const;

    /// M equal weights 1/M.
    static ThinPlan equal(std::size_t m, std::vector<double> b_prime = {kInfinity});
};

/// The M folds of one split. Folds sum entrywise to the input and share its layout.
struct FoldSet {
    std::vector<CountMatrix> folds;
    ThinPlan plan;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return folds.size(); }
    const CountMatrix& operator[](std::size_t m) const { return folds[m]; }
};

/**
 * Split one count into `out.size()` parts.
 *
 * Finite `b_prime` draws DirichletMultinomial(x, eps * b_prime); infinite
 * `b_prime` draws Multinomial(x, eps). A zero count writes zeros and draws nothing.
 */
void split_entry(Count x, std::span<const double> eps, double b_prime, RngStream& rng, std::span<Count> out);

/// RNG stream of entry (row, col) in a matrix with `n_cols` columns.
inline RngStream entry_stream(std::uint64_t seed, std::size_t row, std::size_t col, std::size_t n_cols) noexcept {
    return RngStream(seed, static_cast<std::uint64_t>(row) * n_cols + col);
}

/**
 * Negative binomial count splitting.
 *
 * Parallel over entries with OpenMP. Every entry owns its stream, so the
 * result is bitwise identical for any thread count and matches
 * `reference::nb_count_split`.
 */
FoldSet nb_count_split(const CountMatrix& x, const ThinPlan& plan, std::uint64_t seed);

/// Multinomial splitting; identical to nb_count_split with every b' infinite.
FoldSet poisson_count_split(const CountMatrix& x, std::vector<double> eps, std::uint64_t seed);

/// Sum of all folds except `m`, i.e. X - X^(m).
CountMatrix fold_complement(const FoldSet& folds, std::size_t m);

/// Entrywise sum of all folds.
CountMatrix fold_total(const FoldSet& folds);

namespace reference {

/// Single-threaded splitter kept as the test oracle for the parallel kernel.
/// `reverse` walks the entries from last to first.
FoldSet nb_count_split(const CountMatrix& x, const ThinPlan& plan, std::uint64_t seed, bool reverse = false);

}  // namespace reference

}  // namespace countthin
