#include "countthin/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "countthin/errors.hpp"
#include "countthin/special.hpp"

namespace countthin {

namespace {

constexpr double kLogBLower = -9.210340371976182;  // log 1e-4
constexpr double kLogBUpper = 18.420680743952367;  // log 1e8
constexpr double kBoundarySlack = 1e-2;
constexpr double kMaxEta = 700.0;

// Sum over observations of log Gamma(y + b) - log Gamma(b), via tail counts
// when the counts are small: sum_k log(b + k) * #{i : y_i > k}.
class RisingFactorialSum {
public:
    explicit RisingFactorialSum(std::span<const Count> y) {
        Count max_y = 0;
        for (Count v : y) {
            max_y = std::max(max_y, v);
        }
        use_tail_ = max_y <= std::max<std::size_t>(4 * y.size(), 1024);
        if (use_tail_) {
            tail_.assign(static_cast<std::size_t>(max_y) + 1, 0.0);
            for (Count v : y) {
                if (v > 0) {
                    tail_[v - 1] += 1.0;
                }
            }
            // tail_[k] = #{y > k}
            for (std::size_t k = tail_.size() - 1; k-- > 0;) {
                tail_[k] += tail_[k + 1];
            }
        } else {
            std::vector<Count> sorted(y.begin(), y.end());
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size();) {
                std::size_t j = i;
                while (j < sorted.size() && sorted[j] == sorted[i]) {
                    ++j;
                }
                if (sorted[i] > 0) {
                    unique_.push_back(sorted[i]);
                    counts_.push_back(static_cast<double>(j - i));
                }
                i = j;
            }
        }
    }

    double operator()(double b) const {
        double s = 0.0;
        if (use_tail_) {
            for (std::size_t k = 0; k < tail_.size() && tail_[k] > 0.0; ++k) {
                s += tail_[k] * std::log(b + static_cast<double>(k));
            }
        } else {
            for (std::size_t u = 0; u < unique_.size(); ++u) {
                s += counts_[u] * log_rising_factorial(b, unique_[u]);
            }
        }
        return s;
    }

    bool has_derivatives() const { return use_tail_; }

    // First and second derivatives in b; only available in the tail-count form.
    void derivatives(double b, double& d1, double& d2) const {
        d1 = 0.0;
        d2 = 0.0;
        for (std::size_t k = 0; k < tail_.size() && tail_[k] > 0.0; ++k) {
            const double inv = 1.0 / (b + static_cast<double>(k));
            d1 += tail_[k] * inv;
            d2 -= tail_[k] * inv * inv;
        }
    }

private:
    bool use_tail_ = true;
    std::vector<double> tail_;
    std::vector<Count> unique_;
    std::vector<double> counts_;
};

class Problem {
public:
    Problem(std::span<const Count> y, const Eigen::MatrixXd& x, std::span<const double> offset)
        : y_(y), x_(x), rising_(y) {
        n_ = y.size();
        yd_.resize(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            yd_[static_cast<Eigen::Index>(i)] = y[i];
            log_fact_ += log_factorial(y[i]);
        }
        offset_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < offset.size(); ++i) {
            offset_[static_cast<Eigen::Index>(i)] = offset[i];
        }
    }

    Eigen::VectorXd means(const Eigen::VectorXd& beta) const {
        Eigen::VectorXd eta = x_ * beta + offset_;
        return eta.cwiseMin(kMaxEta).array().exp().matrix();
    }

    double log_likelihood(const Eigen::VectorXd& mu, double b) const {
        double s = -log_fact_;
        if (b == kInfinity) {
            for (Eigen::Index i = 0; i < mu.size(); ++i) {
                s += (yd_[i] > 0.0 ? yd_[i] * std::log(mu[i]) : 0.0) - mu[i];
            }
            return s;
        }
        s += rising_(b);
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            const double m = mu[i];
            if (yd_[i] > 0.0) {
                s += yd_[i] * (std::log(m) - std::log(m + b));
            }
            s -= b * std::log1p(m / b);
        }
        return s;
    }

    bool has_derivatives() const { return rising_.has_derivatives(); }

    // Derivatives of the log-likelihood with respect to t = log b.
    void log_b_derivatives(const Eigen::VectorXd& mu, double b, double& g, double& h) const {
        double d1 = 0.0, d2 = 0.0;
        rising_.derivatives(b, d1, d2);
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            const double m = mu[i];
            const double r = (m - yd_[i]) / (m + b);
            d1 += -std::log1p(m / b) + r;
            d2 += m / (b * (b + m)) - r / (m + b);
        }
        g = b * d1;
        h = b * d1 + b * b * d2;
    }

    const Eigen::MatrixXd& design() const { return x_; }
    const Eigen::VectorXd& y() const { return yd_; }
    const Eigen::VectorXd& offset() const { return offset_; }
    std::size_t n() const { return n_; }

private:
    std::span<const Count> y_;
    const Eigen::MatrixXd& x_;
    RisingFactorialSum rising_;
    std::size_t n_ = 0;
    Eigen::VectorXd yd_;
    Eigen::VectorXd offset_;
    double log_fact_ = 0.0;
};

struct IrlsResult {
    Eigen::VectorXd beta;
    double ll = 0.0;
    bool converged = false;
    bool separated = false;
};

void clip(Eigen::VectorXd& beta, double limit, bool& separated) {
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
        if (std::abs(beta[k]) > limit || !std::isfinite(beta[k])) {
            beta[k] = std::isnan(beta[k]) ? 0.0 : std::copysign(limit, beta[k]);
            separated = true;
        }
    }
}

IrlsResult irls(const Problem& prob, Eigen::VectorXd beta, double b, const GlmOptions& opt) {
    IrlsResult r;
    const Eigen::MatrixXd& x = prob.design();
    const Eigen::VectorXd& y = prob.y();
    Eigen::VectorXd mu = prob.means(beta);
    double ll = prob.log_likelihood(mu, b);
    for (int it = 0; it < opt.max_irls; ++it) {
        Eigen::VectorXd w(mu.size());
        Eigen::VectorXd z(mu.size());
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            const double m = std::max(mu[i], 1e-300);
            w[i] = b == kInfinity ? m : m * b / (m + b);
            z[i] = std::log(m) - prob.offset()[i] + (y[i] - m) / m;
        }
        const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
        Eigen::VectorXd next = (xtw * x).ldlt().solve(xtw * z);
        clip(next, opt.coefficient_limit, r.separated);

        Eigen::VectorXd mu_next = prob.means(next);
        double ll_next = prob.log_likelihood(mu_next, b);
        for (int half = 0; half < 30 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++half) {
            next = 0.5 * (next + beta);
            mu_next = prob.means(next);
            ll_next = prob.log_likelihood(mu_next, b);
        }
        const double step = (next - beta).cwiseAbs().maxCoeff();
        const double scale = 1.0 + beta.cwiseAbs().maxCoeff();
        beta = next;
        mu = mu_next;
        const double change = std::abs(ll_next - ll);
        ll = ll_next;
        if (step <= 1e-11 * scale || (change <= 1e-14 * (1.0 + std::abs(ll)) && step <= 1e-8 * scale)) {
            r.converged = true;
            break;
        }
    }
    r.beta = beta;
    r.ll = ll;
    return r;
}

// Golden-section maximization of the likelihood in log b on [lo, hi].
double golden_log_b(const Problem& prob, const Eigen::VectorXd& mu, double lo, double hi, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, c = hi;
    double x1 = c - kInvPhi * (c - a);
    double x2 = a + kInvPhi * (c - a);
    double f1 = prob.log_likelihood(mu, std::exp(x1));
    double f2 = prob.log_likelihood(mu, std::exp(x2));
    while (c - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (c - a);
            f2 = prob.log_likelihood(mu, std::exp(x2));
        } else {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - kInvPhi * (c - a);
            f1 = prob.log_likelihood(mu, std::exp(x1));
        }
    }
    return 0.5 * (a + c);
}

// Profile update of b at fixed means. `previous` (log scale) narrows the bracket when finite.
// The golden section brackets the optimum; Newton steps in log b then polish it when
// analytic derivatives are available.
double update_dispersion(const Problem& prob, const Eigen::VectorXd& mu, double previous_log_b) {
    const double tol = prob.has_derivatives() ? 1e-4 : 1e-9;
    double t;
    if (std::isfinite(previous_log_b)) {
        const double lo = std::max(kLogBLower, previous_log_b - 1.0);
        const double hi = std::min(kLogBUpper, previous_log_b + 1.0);
        t = golden_log_b(prob, mu, lo, hi, tol);
        const bool at_edge = (t - lo < 2 * tol && lo > kLogBLower) || (hi - t < 2 * tol && hi < kLogBUpper);
        if (at_edge) {
            t = golden_log_b(prob, mu, kLogBLower, kLogBUpper, tol);
        }
    } else {
        t = golden_log_b(prob, mu, kLogBLower, kLogBUpper, tol);
    }
    if (t >= kLogBUpper - kBoundarySlack) {
        return kInfinity;
    }
    if (prob.has_derivatives()) {
        double f = prob.log_likelihood(mu, std::exp(t));
        for (int it = 0; it < 20; ++it) {
            double g = 0.0, h = 0.0;
            prob.log_b_derivatives(mu, std::exp(t), g, h);
            if (!(h < 0.0)) {
                break;
            }
            const double step = std::clamp(-g / h, -0.5, 0.5);
            const double t_new = std::clamp(t + step, kLogBLower, kLogBUpper);
            const double f_new = prob.log_likelihood(mu, std::exp(t_new));
            if (!(f_new >= f)) {
                break;
            }
            const bool done = std::abs(t_new - t) < 1e-12;
            t = t_new;
            f = f_new;
            if (done) {
                break;
            }
        }
        if (t >= kLogBUpper - kBoundarySlack) {
            return kInfinity;
        }
    }
    return std::exp(t);
}

}  // namespace

double nb_log_likelihood(std::span<const Count> y, std::span<const double> mu, double b) {
    if (y.size() != mu.size()) {
        throw InvalidInput("nb_log_likelihood: y and mu differ in length");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        s += nb_log_pmf(y[i], {mu[i], b});
    }
    return s;
}

GlmFit fit_nb_glm(std::span<const Count> y, const Eigen::MatrixXd& design, std::span<const double> offset,
                  const GlmOptions& options) {
    const auto n = static_cast<std::size_t>(design.rows());
    const auto q = static_cast<std::size_t>(design.cols());
    if (y.size() != n) {
        throw InvalidInput("fit_nb_glm: y has " + std::to_string(y.size()) + " entries but the design has " +
                           std::to_string(n) + " rows");
    }
    if (!offset.empty() && offset.size() != n) {
        throw InvalidInput("fit_nb_glm: offset length does not match y");
    }
    if (q == 0 || n < q + 1) {
        throw InvalidInput("fit_nb_glm: need n >= q + 1 observations");
    }
    if (!options.estimate_dispersion && !(options.fixed_b > 0.0)) {
        throw InvalidParameter("fit_nb_glm: fixed dispersion must be positive or +inf");
    }

    Problem prob(y, design, offset);

    // Start from least squares on log(y + 0.5); this also checks the rank.
    Eigen::VectorXd target(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        target[k] = std::log(y[i] + 0.5) - prob.offset()[k];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (static_cast<std::size_t>(qr.rank()) < q) {
        throw SingularDesign("fit_nb_glm: design matrix is rank deficient");
    }
    Eigen::VectorXd beta = qr.solve(target);

    GlmFit fit;
    double b = options.estimate_dispersion ? kInfinity : options.fixed_b;
    IrlsResult cur = irls(prob, beta, b, options);
    bool separated = cur.separated;
    bool converged = cur.converged;
    int iterations = 1;
    fit.log_likelihood_trace.push_back(cur.ll);

    if (options.estimate_dispersion) {
        converged = false;
        double log_b = std::numeric_limits<double>::quiet_NaN();
        for (int outer = 0; outer < options.max_outer; ++outer) {
            ++iterations;
            const Eigen::VectorXd mu = prob.means(cur.beta);
            double b_new = update_dispersion(prob, mu, log_b);
            if (b_new != b && prob.log_likelihood(mu, b_new) < cur.ll) {
                b_new = b;
            }
            const double ll_prev = cur.ll;
            b = b_new;
            log_b = b == kInfinity ? std::numeric_limits<double>::quiet_NaN() : std::log(b);
            cur = irls(prob, cur.beta, b, options);
            separated = separated || cur.separated;
            fit.log_likelihood_trace.push_back(cur.ll);
            if (std::abs(cur.ll - ll_prev) <= options.tolerance * std::max(1.0, std::abs(ll_prev))) {
                converged = cur.converged;
                break;
            }
        }
    }

    fit.coefficients = cur.beta;
    fit.dispersion_b = b;
    fit.log_likelihood = cur.ll;
    fit.separated = separated;
    fit.converged = converged && !separated;
    fit.iterations = iterations;

    // Observed information of the coefficients at fixed b.
    const Eigen::VectorXd mu = prob.means(cur.beta);
    Eigen::VectorXd h(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        h[i] = b == kInfinity ? mu[i] : mu[i] * b * (prob.y()[i] + b) / ((mu[i] + b) * (mu[i] + b));
    }
    const Eigen::MatrixXd info = design.transpose() * h.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const auto qi = static_cast<Eigen::Index>(q);
    fit.standard_errors = Eigen::VectorXd::Constant(qi, std::numeric_limits<double>::quiet_NaN());
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(qi, qi));
        for (Eigen::Index k = 0; k < qi; ++k) {
            fit.standard_errors[k] = cov(k, k) > 0.0 ? std::sqrt(cov(k, k)) : std::numeric_limits<double>::quiet_NaN();
        }
    }
    fit.wald_z = fit.coefficients.cwiseQuotient(fit.standard_errors);
    fit.p_values.resize(qi);
    for (Eigen::Index k = 0; k < qi; ++k) {
        fit.p_values[k] = two_sided_normal_pvalue(fit.wald_z[k]);
    }
    return fit;
}

GlmFit fit_poisson_glm(std::span<const Count> y, const Eigen::MatrixXd& design, std::span<const double> offset) {
    GlmOptions opt;
    opt.estimate_dispersion = false;
    opt.fixed_b = kInfinity;
    return fit_nb_glm(y, design, offset, opt);
}

WaldPValue wald_pvalue(const GlmFit& fit, std::size_t index) {
    if (index >= static_cast<std::size_t>(fit.coefficients.size())) {
        throw InvalidInput("wald_pvalue: coefficient index " + std::to_string(index) + " out of range");
    }
    if (!fit.converged) {
        return {1.0, true};
    }
    return {fit.p_values[static_cast<Eigen::Index>(index)], false};
}

}  // namespace countthin
