#include "countthin/theory.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "countthin/errors.hpp"

namespace countthin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_mu(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw InvalidParameter("mu must be positive and finite, got " + std::to_string(mu));
    }
}

void check_dispersion(double b, const char* name) {
    if (!(b > 0.0)) {
        throw InvalidParameter(std::string(name) + " must be positive or +inf, got " + std::to_string(b));
    }
}

void check_eps(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) {
        throw InvalidParameter("eps must lie in (0, 1), got " + std::to_string(eps));
    }
}

}  // namespace

ThinningMoments thinning_moments(double mu, double b, double b_prime, double eps) {
    check_mu(mu);
    check_dispersion(b, "b");
    check_dispersion(b_prime, "b_prime");
    check_eps(eps);

    ThinningMoments out;
    out.mean = eps * mu;
    if (b == kInf) {
        out.variance = eps * mu;
        out.complement_variance = (1.0 - eps) * mu;
        out.covariance = 0.0;
        out.correlation = 0.0;
        return out;
    }
    const double var_x = mu + mu * mu / b;
    const double ratio = b_prime == kInf ? 0.0 : (b + 1.0) / (b_prime + 1.0);
    const double excess = eps * (1.0 - eps) * (mu * mu / b);
    out.variance = eps * var_x + excess * (ratio - 1.0);
    out.complement_variance = (1.0 - eps) * var_x + excess * (ratio - 1.0);
    out.covariance = excess * (1.0 - ratio);
    out.correlation = out.covariance / std::sqrt(out.variance * out.complement_variance);
    return out;
}

double correlation_at_infinite_bprime(double mu, double b, double eps) {
    check_mu(mu);
    check_dispersion(b, "b");
    check_eps(eps);
    if (b == kInf) {
        return 0.0;
    }
    const double e = eps * (1.0 - eps);
    const double r = b / mu;
    return std::sqrt(e) / std::sqrt(r * r + r + e);
}

double fisher_information_nb(double mu, double b) {
    check_mu(mu);
    check_dispersion(b, "b");
    if (b == kInf) {
        return 1.0 / mu;
    }
    return b / ((b + mu) * mu);
}

double fold_information(double mu, double b, double eps) {
    check_eps(eps);
    return eps * fisher_information_nb(mu, b);
}

}  // namespace countthin
