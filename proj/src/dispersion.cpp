#include "countthin/dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "countthin/distributions.hpp"
#include "countthin/errors.hpp"
#include "countthin/glm.hpp"

namespace countthin {

namespace {

constexpr std::size_t kMinFiniteForSmoothing = 5;

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double nb_profile_mle_dispersion(std::span<const Count> y, std::span<const double> offsets) {
    if (y.size() < 2) {
        throw InvalidInput("nb_profile_mle_dispersion: need at least two observations");
    }
    if (offsets.size() != y.size()) {
        throw InvalidInput("nb_profile_mle_dispersion: offsets length " + std::to_string(offsets.size()) +
                           " does not match y length " + std::to_string(y.size()));
    }
    if (std::all_of(y.begin(), y.end(), [](Count v) { return v == 0; })) {
        throw EstimationDegenerate("nb_profile_mle_dispersion: all counts are zero");
    }
    const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
    return fit_nb_glm(y, design, offsets).dispersion_b;
}

double silverman_bandwidth(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) {
        return 1.0;
    }
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) {
        spread = sd;
    }
    const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    return h > 0.0 && std::isfinite(h) ? h : 1.0;
}

std::vector<double> kernel_smooth(std::span<const double> x, std::span<const double> y, double bandwidth) {
    if (x.size() != y.size()) {
        throw InvalidInput("kernel_smooth: x and y differ in length");
    }
    if (!(bandwidth > 0.0)) {
        throw InvalidParameter("kernel_smooth: bandwidth must be positive");
    }
    const double inv = 1.0 / bandwidth;
    std::vector<double> out(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) {
        double num = 0.0, den = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) {
            const double d = (x[c] - x[a]) * inv;
            const double w = std::exp(-0.5 * d * d);
            num += w * y[c];
            den += w;
        }
        out[a] = num / den;
    }
    return out;
}

DispersionEstimate estimate_dispersions(const CountMatrix& x, const DispersionOptions& options) {
    if (x.rows() < 2) {
        throw InvalidInput("estimate_dispersions: need at least two cells");
    }
    if (!(options.bandwidth_scale > 0.0)) {
        throw InvalidParameter("estimate_dispersions: bandwidth scale must be positive");
    }
    const std::size_t p = x.cols();
    const std::vector<double> totals = x.row_sums();
    std::vector<std::size_t> kept;
    std::vector<double> offsets;
    for (std::size_t i = 0; i < totals.size(); ++i) {
        if (totals[i] > 0.0) {
            kept.push_back(i);
            offsets.push_back(std::log(totals[i]));
        }
    }

    DispersionEstimate est;
    est.mean_expr = x.col_means();
    est.b_mle.assign(p, std::numeric_limits<double>::quiet_NaN());
    est.b_hat.assign(p, kInfinity);
    est.mle_diverged.assign(p, 0);
    est.all_zero.assign(p, 0);

    const auto genes = static_cast<std::int64_t>(p);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t g = 0; g < genes; ++g) {
        const auto j = static_cast<std::size_t>(g);
        const std::vector<Count> full = x.column(j);
        std::vector<Count> y(kept.size());
        bool any = false;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            y[k] = full[kept[k]];
            any = any || y[k] != 0;
        }
        if (!any || kept.size() < 2) {
            est.all_zero[j] = 1;
            continue;
        }
        const Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
        const double b = fit_nb_glm(y, design, offsets).dispersion_b;
        est.b_mle[j] = b;
        est.mle_diverged[j] = b == kInfinity;
    }

    // Smoother inputs: every fitted gene, divergent ones with factor 0.
    std::vector<std::size_t> fitted;
    std::vector<double> lx, ly;
    std::size_t finite = 0;
    for (std::size_t j = 0; j < p; ++j) {
        if (est.all_zero[j]) {
            continue;
        }
        fitted.push_back(j);
        lx.push_back(std::log10(est.mean_expr[j]));
        const double b = est.b_mle[j];
        ly.push_back(b == kInfinity ? 0.0 : std::log1p(est.mean_expr[j] / b));
        finite += b != kInfinity;
    }

    if (finite < kMinFiniteForSmoothing) {
        est.smoothing_infeasible = true;
        for (std::size_t j : fitted) {
            est.b_hat[j] = est.b_mle[j];
        }
        return est;
    }

    est.bandwidth = options.bandwidth_scale * silverman_bandwidth(lx);
    const std::vector<double> smooth = kernel_smooth(lx, ly, est.bandwidth);
    for (std::size_t k = 0; k < fitted.size(); ++k) {
        const double factor = std::expm1(smooth[k]);
        est.b_hat[fitted[k]] = factor > 0.0 ? est.mean_expr[fitted[k]] / factor : kInfinity;
    }
    return est;
}

}  // namespace countthin
