#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "countthin/clustering.hpp"
#include "countthin/matrix.hpp"
#include "countthin/thinning.hpp"

namespace countthin {

/// Held-out MSE for K = 1..k_max (`mse_by_k[K - 1]`) and its smallest minimizer.
struct KSelectionResult {
    std::vector<double> mse_by_k;
    std::size_t k_selected = 1;
    double eps_used = 0.5;
};

struct SelectOptions {
    std::size_t k_max = 10;
    KMeansOptions kmeans;
};

/**
 * Within-cluster held-out error for fixed training labels:
 * mean over (i, j) of (log(test_ij + 1) - log(scale * mu_train[c_i, j] + 1))^2,
 * where mu_train holds raw-count cluster means of `train`.
 */
double heldout_mse(const CountMatrix& train, const CountMatrix& test, std::span<const Label> labels, std::size_t k,
                   double scale);

/**
 * Choose K by clustering log(train + 1) and scoring cluster means, scaled
 * by (1 - eps) / eps, on `test`. Ties go to the smaller K.
 * Throws InvalidInput on shape mismatch, InvalidParameter for eps outside (0, 1).
 */
KSelectionResult select_k(const CountMatrix& train, const CountMatrix& test, double eps, std::uint64_t seed,
                          const SelectOptions& options = {});

/// M-fold cross-validation: sums select_k errors over (complement of fold m, fold m) pairs.
KSelectionResult nbcv_select_k(const CountMatrix& x, std::size_t m_folds, std::vector<double> b_prime,
                               std::uint64_t seed, const SelectOptions& options = {});

/// Cross-validation over an existing equal-weight split.
KSelectionResult nbcv_select_k(const FoldSet& folds, std::uint64_t seed, const SelectOptions& options = {});

/// Smallest K attaining the minimum.
std::size_t argmin_k(std::span<const double> mse_by_k);

struct DeResult {
    std::vector<double> p_values;
    std::vector<std::uint8_t> warning;   ///< p forced to 1 (small cluster, separation or non-convergence)
    std::vector<Label> labels;
};

/// Slope p-values from per-gene NB GLMs of `test` columns on a 0/1 label.
DeResult de_test_with_labels(const CountMatrix& test, std::span<const Label> labels);

/// Two-means clustering of log(train + 1), then de_test_with_labels on `test`.
DeResult de_test(const CountMatrix& train, const CountMatrix& test, std::uint64_t seed,
                 const KMeansOptions& options = {});

/**
 * @brief Agreement between two labelings of the same cells.
 *
 * `matrix` is rows x cols row-major (labels_a down, labels_b across).
 * `permutation` reorders columns for display; identity when not square.
 */
struct ConfusionResult {
    std::vector<std::size_t> matrix;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> permutation;
    double ari = 0.0;
    std::vector<Label> labels_a;
    std::vector<Label> labels_b;
    bool missing_label = false;   ///< a training fold lacked some cluster

    std::size_t at(std::size_t r, std::size_t c) const { return matrix[r * cols + c]; }
    /// Entry at display position (r, c) after the column permutation.
    std::size_t permuted_at(std::size_t r, std::size_t c) const { return matrix[r * cols + permutation[c]]; }
    /// Fraction of cells on the diagonal after the permutation.
    double diagonal_fraction() const;
};

ConfusionResult make_confusion(std::vector<Label> a, std::vector<Label> b, std::size_t rows, std::size_t cols);

/**
 * Cluster-then-classify check: cluster all of X, then predict each cell's
 * label with a nearest-centroid classifier (log(X + 1) space) trained on the
 * other folds.
 */
ConfusionResult intradataset_cv_naive(const CountMatrix& x, std::size_t k, std::size_t n_folds, std::uint64_t seed,
                                      const KMeansOptions& options = {});

/// Split X into two equal folds with `b_prime`, cluster each, and compare.
ConfusionResult intradataset_cv_split(const CountMatrix& x, std::size_t k, std::vector<double> b_prime,
                                      std::uint64_t seed, const KMeansOptions& options = {});

/**
 * Sample-splitting baseline. Rows [0, n/2) train, [n/2, n) test; test rows
 * get the majority label of their 3 nearest training rows (Euclidean on
 * log(X + 1); the nearest one decides a three-way tie).
 * Throws InvalidInput when n < 8 or n is odd.
 */
std::vector<Label> transfer_labels_knn(const CountMatrix& train, std::span<const Label> train_labels,
                                       const CountMatrix& test, std::size_t neighbors = 3);

KSelectionResult sample_split_select_k(const CountMatrix& x, std::uint64_t seed, const SelectOptions& options = {});

DeResult sample_split_de(const CountMatrix& x, std::uint64_t seed, const KMeansOptions& options = {});

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic p-value with the (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D correction.
KsResult ks_uniform(std::span<const double> values);

}  // namespace countthin
