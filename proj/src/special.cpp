#include "countthin/special.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace countthin {

namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

constexpr int kFactorialTable = 256;

struct LogFactorialTable {
    std::array<double, kFactorialTable> values{};
    LogFactorialTable() {
        values[0] = 0.0;
        for (int k = 1; k < kFactorialTable; ++k) {
            values[k] = values[k - 1] + std::log(static_cast<double>(k));
        }
    }
};

const LogFactorialTable& factorial_table() {
    static const LogFactorialTable table;
    return table;
}

}  // namespace

double log_gamma(double x) noexcept {
    if (x < 0.5) {
        // reflection
        return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) - log_gamma(1.0 - x);
    }
    x -= 1.0;
    double a = kLanczos[0];
    for (int i = 1; i < 9; ++i) {
        a += kLanczos[i] / (x + i);
    }
    const double t = x + kLanczosG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t + std::log(a);
}

double log_factorial(std::uint64_t k) noexcept {
    if (k < static_cast<std::uint64_t>(kFactorialTable)) {
        return factorial_table().values[k];
    }
    return log_gamma(static_cast<double>(k) + 1.0);
}

double log_rising_factorial(double b, std::uint64_t x) noexcept {
    if (x == 0) {
        return 0.0;
    }
    if (x <= 64) {
        double s = 0.0;
        for (std::uint64_t k = 0; k < x; ++k) {
            s += std::log(b + static_cast<double>(k));
        }
        return s;
    }
    const double xd = static_cast<double>(x);
    if (b > 1e3 * xd) {
        double s = xd * std::log(b);
        for (std::uint64_t k = 1; k < x; ++k) {
            s += std::log1p(static_cast<double>(k) / b);
        }
        return s;
    }
    return log_gamma(xd + b) - log_gamma(b);
}

double normal_upper_tail(double z) noexcept {
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double two_sided_normal_pvalue(double z) noexcept {
    if (std::isnan(z)) {
        return 1.0;
    }
    return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

double kolmogorov_survival(double lambda) noexcept {
    if (!(lambda > 0.0)) {
        return 1.0;
    }
    if (lambda < 1.18) {
        // Theta-function form converges fast for small lambda.
        const double f = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k <= 20; k += 2) {
            s += std::exp(f * k * k);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-300) {
            break;
        }
    }
    return std::clamp(s, 0.0, 1.0);
}

}  // namespace countthin
