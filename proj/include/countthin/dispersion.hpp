#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "countthin/matrix.hpp"

namespace countthin {

/// Per-gene overdispersion estimates before and after smoothing.
struct DispersionEstimate {
    std::vector<double> b_hat;       ///< smoothed; +inf for near-Poisson or all-zero genes
    std::vector<double> b_mle;       ///< raw profile MLE; +inf at the upper boundary, NaN if not fitted
    std::vector<double> mean_expr;   ///< mean count per gene
    std::vector<std::uint8_t> mle_diverged;   ///< MLE hit +inf
    std::vector<std::uint8_t> all_zero;       ///< gene had no counts; b_hat set to +inf
    bool smoothing_infeasible = false;        ///< fewer than 5 finite MLEs; b_hat holds the raw MLEs
    double bandwidth = 0.0;                   ///< kernel bandwidth on log10 mean expression
};

struct DispersionOptions {
    double bandwidth_scale = 1.0;   ///< multiplies the Silverman bandwidth
};

/**
 * Profile maximum likelihood estimate of b for one gene.
 *
 * The mean is log(mu_i) = beta_0 + offsets_i, fit jointly with b. Returns
 * +inf when the likelihood keeps rising towards the Poisson limit.
 * Throws InvalidInput for n < 2 or mismatched lengths, EstimationDegenerate
 * when y is all zero.
 */
double nb_profile_mle_dispersion(std::span<const Count> y, std::span<const double> offsets);

/**
 * Two-step estimate: per-gene profile MLE with offset log(row total), then a
 * Gaussian Nadaraya-Watson regression of log(1 + mean/b_mle) on log10 mean
 * expression, back-transformed to b_hat = mean / (exp(fit) - 1).
 *
 * Cells with zero total are left out of the per-gene fits.
 */
DispersionEstimate estimate_dispersions(const CountMatrix& x, const DispersionOptions& options = {});

/// Kernel smoother used above, exposed for testing: fitted values at every `x`.
std::vector<double> kernel_smooth(std::span<const double> x, std::span<const double> y, double bandwidth);

/// Silverman's rule of thumb, 0.9 min(sd, IQR / 1.34) n^(-1/5), with fallbacks for degenerate spreads.
double silverman_bandwidth(std::span<const double> x);

}  // namespace countthin
