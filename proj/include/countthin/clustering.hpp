#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "countthin/matrix.hpp"

namespace countthin {

using Label = std::uint32_t;

/// K-means solution. `centroids` is K x p row-major in the clustered (log) space.
struct ClusterModel {
    std::vector<Label> assignments;
    std::vector<double> centroids;
    std::size_t k = 0;
    std::size_t p = 0;
    double inertia = 0.0;
    int restarts_used = 0;
};

struct KMeansOptions {
    int restarts = 10;
    int max_iterations = 100;
};

/**
 * Lloyd's algorithm with k-means++ seeding on an n x p row-major matrix.
 *
 * Each restart draws from its own stream derived from `seed`; the lowest
 * inertia wins, earlier restarts on ties. Distance ties go to the lower
 * centroid index. An emptied cluster is re-seeded at the point farthest
 * from its current centroid. Throws InvalidParameter unless 1 <= k <= n.
 */
ClusterModel kmeans(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// kmeans on log(X + 1).
ClusterModel kmeans_log(const CountMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Adjusted Rand index (Hubert and Arabie). Returns 1 when both partitions are trivial in the same way.
double adjusted_rand_index(std::span<const Label> a, std::span<const Label> b);

/// Row-major contingency table of labels `a` (rows) against `b` (columns), labels taken as indices.
std::vector<std::size_t> confusion_matrix(std::span<const Label> a, std::span<const Label> b, std::size_t rows,
                                          std::size_t cols);

/**
 * Column order that maximizes the diagonal sum of a square count matrix
 * (Hungarian algorithm): column perm[r] is displayed at position r.
 * Throws InvalidInput if rows != cols or the sizes disagree.
 */
std::vector<std::size_t> best_diagonal_permutation(std::span<const std::size_t> matrix, std::size_t rows,
                                                   std::size_t cols);

}  // namespace countthin
