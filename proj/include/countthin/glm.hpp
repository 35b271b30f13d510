#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "countthin/distributions.hpp"

namespace countthin {

struct GlmOptions {
    int max_outer = 100;        ///< alternations between coefficients and dispersion
    int max_irls = 100;
    double tolerance = 1e-9;    ///< relative log-likelihood change between outer iterations
    bool estimate_dispersion = true;
    double fixed_b = kInfinity; ///< used when estimate_dispersion is false
    double coefficient_limit = 30.0;
};

/**
 * @brief Negative binomial log-link GLM fit with Wald statistics.
 *
 * `p_values` are the raw two-sided normal tails of `wald_z`; use
 * `wald_pvalue` for the conservative value that accounts for convergence.
 */
struct GlmFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd wald_z;
    Eigen::VectorXd p_values;
    double dispersion_b = kInfinity;
    double log_likelihood = 0.0;
    bool converged = false;
    bool separated = false;   ///< some coefficient hit the +-30 clip
    int iterations = 0;
    std::vector<double> log_likelihood_trace;   ///< after each outer iteration
};

/**
 * Fit y ~ NB(mu, b) with log(mu) = design * beta + offset.
 *
 * Alternates IRLS for beta at fixed b with a golden-section search for b
 * over log b in [log 1e-4, log 1e8]. An optimum at the upper end is
 * reported as b = +inf and the coefficients are refit as a Poisson GLM.
 * Standard errors come from the observed information of the coefficients.
 *
 * Throws InvalidInput on shape errors or n < q + 1, SingularDesign when the
 * design is rank deficient.
 */
GlmFit fit_nb_glm(std::span<const Count> y, const Eigen::MatrixXd& design, std::span<const double> offset = {},
                  const GlmOptions& options = {});

/// Poisson GLM (b fixed at +inf).
GlmFit fit_poisson_glm(std::span<const Count> y, const Eigen::MatrixXd& design, std::span<const double> offset = {});

struct WaldPValue {
    double p_value = 1.0;
    bool warning = false;   ///< fit did not converge; p forced to 1
};

/// Two-sided normal Wald p-value of coefficient `index`. Throws InvalidInput if the index is out of range.
WaldPValue wald_pvalue(const GlmFit& fit, std::size_t index);

/// NB log-likelihood of y at means `mu` (b = +inf gives the Poisson likelihood).
double nb_log_likelihood(std::span<const Count> y, std::span<const double> mu, double b);

}  // namespace countthin
