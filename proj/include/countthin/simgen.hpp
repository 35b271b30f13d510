#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "countthin/matrix.hpp"

namespace countthin {

/// Ground truth of a simulated dataset. Matrices are row-major.
struct SimTruth {
    std::size_t n = 0;
    std::size_t p = 0;
    std::size_t k_star = 1;
    double beta_star = 0.0;
    double tau = 1.0;

    std::vector<double> beta;          ///< p x k_star; column 0 holds the baselines
    std::vector<double> lambda;        ///< n x p means, exp(L beta^T)
    std::vector<double> gamma;         ///< size factors, all ones
    std::vector<double> b;             ///< per-gene overdispersion, mean(lambda_j) / tau
    std::vector<std::uint32_t> true_labels;
    std::vector<std::size_t> de_genes;

    /// Latent design L (n x k_star): a column of ones followed by cluster indicators.
    std::vector<double> latent() const;

    double beta_at(std::size_t gene, std::size_t k) const { return beta[gene * k_star + k]; }
    double lambda_at(std::size_t cell, std::size_t gene) const { return lambda[cell * p + gene]; }
};

struct SimDataset {
    CountMatrix counts;
    SimTruth truth;
};

/// Genes per differential block: ceil(0.05 p).
std::size_t de_block_size(std::size_t p) noexcept;

/**
 * Latent-cluster simulation.
 *
 * Baselines beta_j0 ~ N(0, 1); each cell joins one of `k_star` clusters
 * uniformly; cluster k >= 1 shifts the log mean of genes
 * [(k-1) s, k s) by `beta_star`, with s = de_block_size(p). Counts are
 * NB(lambda_ij, b_j) with b_j = mean_i(lambda_ij) / tau.
 *
 * Throws InvalidParameter when n, p or k_star is zero, tau is not positive,
 * or the blocks do not fit in p genes.
 */
SimDataset generate_dataset(std::size_t n, std::size_t p, std::size_t k_star, double beta_star, double tau,
                            std::uint64_t seed);

/// 100 x 2 matrix of i.i.d. NB(5, 5) counts.
CountMatrix generate_toy(std::uint64_t seed);

}  // namespace countthin
