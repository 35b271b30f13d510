#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "countthin/rng.hpp"

namespace countthin {

using Count = std::uint32_t;

/// Sentinel for b = +infinity, the Poisson limit of the negative binomial.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/**
 * @brief Negative binomial in the mean/overdispersion parameterization.
 *
 * Variance is `mu + mu^2 / b`; `b == kInfinity` is the Poisson limit and is
 * handled by its own exact code path rather than a large finite `b`.
 */
struct NBParams {
    double mu = 1.0;
    double b = kInfinity;

    bool is_poisson() const noexcept { return b == kInfinity; }
    double variance() const noexcept { return is_poisson() ? mu : mu + mu * mu / b; }

    /// Throws InvalidParameter unless mu > 0 and (b > 0 or b == +inf).
    void validate() const;
};

// Scalar samplers. Each consumes draws only from the stream it is given.

double sample_gamma(double shape, double scale, RngStream& rng);

/// log of a Gamma(shape, 1) draw; stays finite for shapes far below 1 where the draw itself underflows.
double sample_log_gamma(double shape, RngStream& rng);

double sample_beta(double a, double b, RngStream& rng);

Count sample_poisson(double mean, RngStream& rng);

Count sample_binomial(Count trials, double prob, RngStream& rng);

/// Gamma(b, b) mixing followed by a Poisson draw; exact Poisson path for b = +inf.
Count sample_nb(const NBParams& params, RngStream& rng);

Count sample_beta_binomial(Count total, double a, double b, RngStream& rng);

// Vector samplers write into `out`, which must have the same length as the parameter span.

void sample_dirichlet(std::span<const double> alphas, RngStream& rng, std::span<double> out);

/// Sequential conditional binomials. `probs` must be nonnegative with positive sum; it is normalized internally.
void sample_multinomial(Count total, std::span<const double> probs, RngStream& rng, std::span<Count> out);

/**
 * Dirichlet draw (normalized log-Gamma variates) followed by a multinomial draw.
 * `total == 0` returns zeros without touching the stream.
 */
void sample_dirichlet_multinomial(Count total, std::span<const double> alphas, RngStream& rng,
                                  std::span<Count> out);

std::vector<Count> sample_dirichlet_multinomial(Count total, std::span<const double> alphas, RngStream& rng);
std::vector<Count> sample_multinomial(Count total, std::span<const double> probs, RngStream& rng);

double nb_log_pmf(Count x, const NBParams& params);
double poisson_log_pmf(Count x, double mu);

}  // namespace countthin
