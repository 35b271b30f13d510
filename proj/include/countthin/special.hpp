#pragma once

#include <cstdint>

namespace countthin {

/**
 * Natural log of the Gamma function for x > 0.
 *
 * Lanczos approximation (g = 7, nine terms). Unlike `std::lgamma` this does
 * not write the global `signgam`, so it is safe inside OpenMP regions.
 */
double log_gamma(double x) noexcept;

/// log(k!) with a lookup table for small k.
double log_factorial(std::uint64_t k) noexcept;

/**
 * log(Gamma(x + b) / Gamma(b)) = sum_{k < x} log(b + k), evaluated without the
 * cancellation that the lgamma difference suffers when b >> x.
 */
double log_rising_factorial(double b, std::uint64_t x) noexcept;

/// Upper standard-normal tail, 1 - Phi(z).
double normal_upper_tail(double z) noexcept;

/// 2 * (1 - Phi(|z|)).
double two_sided_normal_pvalue(double z) noexcept;

/// Kolmogorov distribution upper tail P(K > lambda).
double kolmogorov_survival(double lambda) noexcept;

}  // namespace countthin
