#include "countthin/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "countthin/errors.hpp"
#include "countthin/special.hpp"

namespace countthin {

namespace {

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvalidParameter(std::string(name) + " must be positive and finite, got " + std::to_string(value));
    }
}

void require_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidParameter("probability must lie in [0, 1], got " + std::to_string(p));
    }
}

Count poisson_inversion(double mean, RngStream& rng) {
    // Sequential search from zero; mean < 10 keeps this short.
    while (true) {
        double u = rng.uniform();
        double p = std::exp(-mean);
        double cdf = p;
        Count k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / k;
            cdf += p;
        }
        if (k < 1000) {
            return k;
        }
    }
}

// Hormann (1993) transformed rejection with squeeze, for mean >= 10.
Count poisson_ptrs(double mean, RngStream& rng) {
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);

    while (true) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<Count>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        const double lhs = std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b);
        const double rhs = -mean + k * log_mean - log_factorial(static_cast<std::uint64_t>(k));
        if (lhs <= rhs) {
            return static_cast<Count>(k);
        }
    }
}

Count binomial_inversion(Count n, double p, RngStream& rng) {
    const double q = 1.0 - p;
    const double s = p / q;
    const double a = (n + 1) * s;
    const double r0 = std::pow(q, static_cast<double>(n));
    while (true) {
        double r = r0;
        double u = rng.uniform();
        Count x = 0;
        bool ok = true;
        while (u > r) {
            u -= r;
            ++x;
            if (x > n) {
                ok = false;
                break;
            }
            r *= a / x - s;
        }
        if (ok) {
            return x;
        }
    }
}

// Hormann (1993) BTRS, for n * min(p, 1 - p) >= 10 and p <= 0.5.
Count binomial_btrs(Count n, double p, RngStream& rng) {
    const double q = 1.0 - p;
    const double nd = static_cast<double>(n);
    const double spq = std::sqrt(nd * p * q);
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * p;
    const double c = nd * p + 0.5;
    const double vr = 0.92 - 4.2 / b;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double lpq = std::log(p / q);
    const double m = std::floor((nd + 1.0) * p);
    const double h = log_factorial(static_cast<std::uint64_t>(m)) + log_factorial(static_cast<std::uint64_t>(nd - m));

    while (true) {
        const double u = rng.uniform() - 0.5;
        double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + c);
        if (k < 0.0 || k > nd) {
            continue;
        }
        if (us >= 0.07 && v <= vr) {
            return static_cast<Count>(k);
        }
        v = std::log(v * alpha / (a / (us * us) + b));
        const double bound = h - log_factorial(static_cast<std::uint64_t>(k)) -
                             log_factorial(static_cast<std::uint64_t>(nd - k)) + (k - m) * lpq;
        if (v <= bound) {
            return static_cast<Count>(k);
        }
    }
}

// Multinomial over unnormalized nonnegative weights.
void multinomial_from_weights(Count total, std::span<const double> weights, RngStream& rng,
                              std::span<Count> out) {
    const std::size_t m = weights.size();
    double remaining_weight = 0.0;
    for (double w : weights) {
        remaining_weight += w;
    }
    Count remaining = total;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        if (remaining == 0) {
            out[k] = 0;
            continue;
        }
        double p = remaining_weight > 0.0 ? weights[k] / remaining_weight : 0.0;
        p = std::clamp(p, 0.0, 1.0);
        const Count draw = sample_binomial(remaining, p, rng);
        out[k] = draw;
        remaining -= draw;
        remaining_weight -= weights[k];
        if (remaining_weight < 0.0) {
            remaining_weight = 0.0;
        }
    }
    out[m - 1] = remaining;
}

}  // namespace

void NBParams::validate() const {
    require_positive(mu, "mu");
    if (!(b > 0.0)) {
        throw InvalidParameter("overdispersion b must be positive or +inf, got " + std::to_string(b));
    }
}

double sample_gamma(double shape, double scale, RngStream& rng) {
    require_positive(shape, "gamma shape");
    require_positive(scale, "gamma scale");
    std::gamma_distribution<double> dist(shape, scale);
    return dist(rng);
}

double sample_log_gamma(double shape, RngStream& rng) {
    require_positive(shape, "gamma shape");
    if (shape >= 1.0) {
        std::gamma_distribution<double> dist(shape, 1.0);
        return std::log(dist(rng));
    }
    // Gamma(a) = Gamma(a + 1) * U^(1/a), taken in log space.
    std::gamma_distribution<double> dist(shape + 1.0, 1.0);
    const double g = std::log(dist(rng));
    return g + std::log(rng.uniform()) / shape;
}

double sample_beta(double a, double b, RngStream& rng) {
    const double la = sample_log_gamma(a, rng);
    const double lb = sample_log_gamma(b, rng);
    return 1.0 / (1.0 + std::exp(lb - la));
}

Count sample_poisson(double mean, RngStream& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw InvalidParameter("poisson mean must be finite and nonnegative, got " + std::to_string(mean));
    }
    if (mean == 0.0) {
        return 0;
    }
    return mean < 10.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

Count sample_binomial(Count trials, double prob, RngStream& rng) {
    require_probability(prob);
    if (trials == 0 || prob == 0.0) {
        return 0;
    }
    if (prob == 1.0) {
        return trials;
    }
    const bool flip = prob > 0.5;
    const double p = flip ? 1.0 - prob : prob;
    const Count k = (static_cast<double>(trials) * p < 10.0) ? binomial_inversion(trials, p, rng)
                                                             : binomial_btrs(trials, p, rng);
    return flip ? trials - k : k;
}

Count sample_nb(const NBParams& params, RngStream& rng) {
    params.validate();
    if (params.is_poisson()) {
        return sample_poisson(params.mu, rng);
    }
    std::gamma_distribution<double> mixing(params.b, 1.0 / params.b);
    return sample_poisson(params.mu * mixing(rng), rng);
}

Count sample_beta_binomial(Count total, double a, double b, RngStream& rng) {
    require_positive(a, "beta-binomial a");
    require_positive(b, "beta-binomial b");
    if (total == 0) {
        return 0;
    }
    return sample_binomial(total, sample_beta(a, b, rng), rng);
}

void sample_dirichlet(std::span<const double> alphas, RngStream& rng, std::span<double> out) {
    if (alphas.size() != out.size() || alphas.size() < 2) {
        throw InvalidInput("dirichlet needs at least two components and a matching output span");
    }
    for (double a : alphas) {
        require_positive(a, "dirichlet alpha");
    }
    double max_log = -kInfinity;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        out[k] = sample_log_gamma(alphas[k], rng);
        max_log = std::max(max_log, out[k]);
    }
    double sum = 0.0;
    for (double& v : out) {
        v = std::exp(v - max_log);
        sum += v;
    }
    for (double& v : out) {
        v /= sum;
    }
}

void sample_multinomial(Count total, std::span<const double> probs, RngStream& rng, std::span<Count> out) {
    if (probs.size() != out.size() || probs.empty()) {
        throw InvalidInput("multinomial needs a nonempty probability vector and a matching output span");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw InvalidParameter("multinomial probabilities must be finite and nonnegative");
        }
        sum += p;
    }
    if (!(sum > 0.0)) {
        throw InvalidParameter("multinomial probabilities must have positive sum");
    }
    if (total == 0) {
        std::fill(out.begin(), out.end(), Count{0});
        return;
    }
    multinomial_from_weights(total, probs, rng, out);
}

void sample_dirichlet_multinomial(Count total, std::span<const double> alphas, RngStream& rng,
                                  std::span<Count> out) {
    if (alphas.size() != out.size() || alphas.size() < 2) {
        throw InvalidInput("dirichlet-multinomial needs at least two components and a matching output span");
    }
    for (double a : alphas) {
        require_positive(a, "dirichlet-multinomial alpha");
    }
    if (total == 0) {
        std::fill(out.begin(), out.end(), Count{0});
        return;
    }
    // Unnormalized weights exp(log G_k - max) feed the multinomial directly.
    constexpr std::size_t kStack = 16;
    double stack[kStack];
    std::vector<double> heap;
    std::span<double> weights;
    if (alphas.size() <= kStack) {
        weights = std::span<double>(stack, alphas.size());
    } else {
        heap.resize(alphas.size());
        weights = heap;
    }
    double max_log = -kInfinity;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        weights[k] = sample_log_gamma(alphas[k], rng);
        max_log = std::max(max_log, weights[k]);
    }
    for (double& w : weights) {
        w = std::exp(w - max_log);
    }
    multinomial_from_weights(total, weights, rng, out);
}

std::vector<Count> sample_dirichlet_multinomial(Count total, std::span<const double> alphas, RngStream& rng) {
    std::vector<Count> out(alphas.size());
    sample_dirichlet_multinomial(total, alphas, rng, out);
    return out;
}

std::vector<Count> sample_multinomial(Count total, std::span<const double> probs, RngStream& rng) {
    std::vector<Count> out(probs.size());
    sample_multinomial(total, probs, rng, out);
    return out;
}

double nb_log_pmf(Count x, const NBParams& params) {
    params.validate();
    if (params.is_poisson()) {
        return poisson_log_pmf(x, params.mu);
    }
    const double mu = params.mu;
    const double b = params.b;
    // x log(mu/(mu+b)) + b log(b/(mu+b)), with the b-term via log1p for large b.
    const double xd = static_cast<double>(x);
    return log_rising_factorial(b, x) - log_factorial(x) + xd * (std::log(mu) - std::log(mu + b)) -
           b * std::log1p(mu / b);
}

double poisson_log_pmf(Count x, double mu) {
    require_positive(mu, "poisson mean");
    return static_cast<double>(x) * std::log(mu) - mu - log_factorial(x);
}

}  // namespace countthin
