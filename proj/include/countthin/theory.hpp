#pragma once

namespace countthin {

/// Closed-form moments of fold m and its complement after splitting X ~ NB(mu, b) with thinning dispersion b'.
struct ThinningMoments {
    double mean = 0.0;                 ///< E[X^(m)] = eps * mu
    double variance = 0.0;             ///< Var(X^(m))
    double complement_variance = 0.0;  ///< Var(X^(-m))
    double covariance = 0.0;           ///< Cov(X^(m), X^(-m))
    double correlation = 0.0;          ///< covariance / sqrt(variance * complement_variance)
};

/**
 * Moments of a Dirichlet-multinomial split of NB(mu, b) data.
 *
 * With r = (b + 1) / (b' + 1) (r = 0 for b' = inf):
 *   variance   = eps Var(X) + eps (1 - eps) (mu^2 / b) (r - 1)
 *   covariance = eps (1 - eps) (mu^2 / b) (1 - r)
 * so the folds are uncorrelated exactly when b' = b. `b = inf` gives the
 * Poisson case with zero covariance for every b'.
 */
ThinningMoments thinning_moments(double mu, double b, double b_prime, double eps);

/// Correlation between fold m and its complement when NB(mu, b) data are split multinomially (b' = inf).
double correlation_at_infinite_bprime(double mu, double b, double eps);

/// Fisher information about mu in one NB(mu, b) observation: b / ((b + mu) mu); 1/mu when b = inf.
double fisher_information_nb(double mu, double b);

/// Information retained by a fold of weight eps when b' = b: eps times the total.
double fold_information(double mu, double b, double eps);

}  // namespace countthin
