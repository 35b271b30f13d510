// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "countthin/clustering.hpp"
#include "countthin/dispersion.hpp"
#include "countthin/evaluation.hpp"
#include "countthin/glm.hpp"
#include "countthin/rng.hpp"
#include "countthin/simgen.hpp"
#include "countthin/theory.hpp"
#include "countthin/thinning.hpp"
#include "support/stats_oracles.hpp"

using namespace countthin;

namespace {

constexpr std::uint64_t kSeed = 20230415;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

ThinPlan plan_of(std::vector<double> eps, std::vector<double> b_prime) {
    ThinPlan p;
    p.eps = std::move(eps);
    p.b_prime = std::move(b_prime);
    return p;
}

std::vector<Count> nb_column(std::size_t n, double mu, double b, std::uint64_t seed) {
    std::vector<Count> v(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        RngStream r(seed, static_cast<std::uint64_t>(i));
        v[static_cast<std::size_t>(i)] = sample_nb({mu, b}, r);
    }
    return v;
}

std::vector<double> as_doubles(const CountMatrix& m) {
    const CountMatrix d = m.to_dense();
    const auto v = d.dense_values();
    return {v.begin(), v.end()};
}

// 1. Sum of folds equals X entrywise for random shapes, layouts, M and b'.
Outcome exact_additivity() {
    const auto t0 = Clock::now();
    const std::size_t ms[] = {2, 3, 10};
    int exact = 0;
    std::size_t entries = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        RngStream r(derive_seed(kSeed, "c1"), t);
        const auto n = 1 + static_cast<std::size_t>(r.uniform() * 500);
        const auto p = 1 + static_cast<std::size_t>(r.uniform() * 500);
        const double density = r.uniform();
        const double scale = std::exp(r.uniform() * 6.0);
        std::vector<Count> v(n * p);
        for (auto& c : v) {
            c = r.uniform() < density ? static_cast<Count>(-std::log(1.0 - r.uniform()) * scale) : 0;
        }
        const Layout layout = t % 2 == 0 ? Layout::Sparse : Layout::Dense;
        const CountMatrix x = CountMatrix::dense(n, p, std::move(v)).with_layout(layout);
        const std::size_t m = ms[t % 3];
        std::vector<double> eps(m);
        double sum = 0.0;
        for (auto& e : eps) {
            e = 0.1 + r.uniform();
            sum += e;
        }
        double head = 0.0;
        for (std::size_t k = 0; k + 1 < m; ++k) {
            eps[k] /= sum;
            head += eps[k];
        }
        eps[m - 1] = 1.0 - head;
        std::vector<double> bp(p);
        for (auto& b : bp) {
            b = r.uniform() < 0.2 ? kInfinity : std::exp(r.uniform() * 12.0 - 5.0);
        }
        const FoldSet folds = nb_count_split(x, plan_of(eps, bp), derive_seed(kSeed, t));
        const CountMatrix total = fold_total(folds);
        exact += same_entries(total, x) && total.layout() == x.layout();
        entries += n * p;
    }
    const double secs = seconds_since(t0);
    return {exact == 100 && secs < 10.0,
            fmt("%d/100 matrices exact (%zu entries), %.1f s (limit 10 s)", exact, entries, secs)};
}

// 2. Fold correlation across b' for NB(25, 8) data against the closed form.
Outcome correlation_curve() {
    const auto t0 = Clock::now();
    const std::size_t n = 100000;
    const auto x = nb_column(n, 25.0, 8.0, derive_seed(kSeed, "c2"));
    const CountMatrix m = CountMatrix::dense(n, 1, x);
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i) {
        grid.push_back(std::pow(10.0, -2.0 + 6.0 * i / 19.0));
    }
    grid.push_back(8.0);
    grid.push_back(kInfinity);
    double max_dev = 0.0, corr8 = 0.0, corr_inf = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const FoldSet f = nb_count_split(m, plan_of({0.3, 0.7}, {grid[g]}), derive_seed(kSeed, g));
        const double emp = testing::correlation(as_doubles(f[0]), as_doubles(f[1]));
        const double theory = thinning_moments(25.0, 8.0, grid[g], 0.3).correlation;
        max_dev = std::max(max_dev, std::abs(emp - theory));
        if (grid[g] == 8.0) {
            corr8 = emp;
        }
        if (std::isinf(grid[g])) {
            corr_inf = emp;
        }
    }
    const double formula_inf = correlation_at_infinite_bprime(25.0, 8.0, 0.3);
    const double secs = seconds_since(t0);
    const bool pass = max_dev < 0.02 && std::abs(corr8) < 0.01 && std::abs(corr_inf - 0.576) <= 0.01 &&
                      std::abs(formula_inf - 0.576) <= 0.01 && secs < 30.0;
    return {pass, fmt("max |emp - theory| %.4f (< 0.02); corr(b'=8) %.4f (|.| < 0.01); corr(b'=inf) %.4f, formula "
                      "%.4f (0.576 +- 0.01); %.1f s (limit 30 s)",
                      max_dev, corr8, corr_inf, formula_inf, secs)};
}

// 3. With b' = b each fold is NB(eps mu, eps b).
Outcome fold_marginals() {
    struct Case {
        double mu, b, eps;
    };
    const Case cases[] = {{25, 8, 0.3}, {5, 5, 0.5}, {2, 0.5, 0.1}};
    const std::size_t n = 100000;
    double worst = 0.0;
    std::string detail;
    for (std::size_t c = 0; c < 3; ++c) {
        const Case& k = cases[c];
        const auto x = nb_column(n, k.mu, k.b, derive_seed(derive_seed(kSeed, "c3"), c));
        const FoldSet f = nb_count_split(CountMatrix::dense(n, 1, x), plan_of({k.eps, 1.0 - k.eps}, {k.b}),
                                         derive_seed(derive_seed(kSeed, "c3split"), c));
        for (std::size_t m = 0; m < 2; ++m) {
            const double e = m == 0 ? k.eps : 1.0 - k.eps;
            const double mean = e * k.mu;
            const double var = mean + mean * mean / (e * k.b);
            const auto mo = testing::moments(as_doubles(f[m]));
            const double zm = std::abs(mo.mean - mean) / mo.se_mean();
            const double zv = std::abs(mo.variance - var) / mo.se_variance();
            worst = std::max({worst, zm, zv});
        }
        detail += fmt("(%g,%g,%g) ", k.mu, k.b, k.eps);
    }
    return {worst <= 4.0, fmt("largest |z| over means and variances of both folds %.2f (<= 4 SE) for %s", worst,
                              detail.c_str())};
}

// 4. Fisher information and its split across folds.
Outcome fisher_split() {
    const double info = fisher_information_nb(25.0, 8.0);
    const double target = 8.0 / 825.0;
    double worst_ulps = 0.0;
    int bit_exact = 0;
    double chain_dev = 0.0;
    for (std::uint64_t t = 0; t < 50; ++t) {
        RngStream r(derive_seed(kSeed, "c4"), t);
        const double mu = std::exp(r.uniform() * 8.0 - 3.0);
        const double b = std::exp(r.uniform() * 8.0 - 3.0);
        const double eps = 0.01 + 0.98 * r.uniform();
        const double total = fisher_information_nb(mu, b);
        const double fold = fold_information(mu, b, eps);
        const double rest = fold_information(mu, b, 1.0 - eps);
        const double sum = fold + rest;
        bit_exact += sum == total;
        worst_ulps = std::max(worst_ulps, std::abs(sum - total) / (std::nextafter(total, 2 * total) - total));
        // Independent route: the fold is NB(eps mu, eps b), and d(eps mu)/d mu = eps.
        const double chain = eps * eps * (eps * b) / ((eps * b + eps * mu) * eps * mu);
        chain_dev = std::max(chain_dev, std::abs(chain - fold) / fold);
    }
    const bool pass = std::abs(info - target) <= 1e-12 && worst_ulps <= 2.0 && chain_dev <= 1e-14;
    return {pass, fmt("I(25,8) - 8/825 = %.2e (<= 1e-12); fold sums: %d/50 bit-exact, worst %.0f ulp (<= 2 ulp "
                      "rounding); chain-rule fold information rel. dev %.1e",
                      info - target, bit_exact, worst_ulps, chain_dev)};
}

struct SelectionRun {
    std::size_t naive_k, nbcs_k, pcs_k;
    std::vector<double> naive_mse;
};

// 5. K selection by naive reuse, NB splitting with known b, and Poisson splitting.
Outcome k_selection() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (std::size_t k_star : {1U, 3U}) {
        for (double tau : {1.0, 5.0}) {
            const std::uint64_t cell = derive_seed(derive_seed(kSeed, "c5"), k_star * 10 + static_cast<std::uint64_t>(tau));
            std::vector<SelectionRun> runs(100);
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t d = 0; d < 100; ++d) {
                const std::uint64_t s = derive_seed(cell, static_cast<std::uint64_t>(d));
                const SimDataset data = generate_dataset(200, 100, k_star, 1.5, tau, derive_seed(s, "data"));
                const KSelectionResult naive = select_k(data.counts, data.counts, 0.5, derive_seed(s, "naive"));
                const FoldSet nb = nb_count_split(data.counts, plan_of({0.5, 0.5}, data.truth.b), derive_seed(s, "nbsplit"));
                const KSelectionResult nbcs = select_k(nb[0], nb[1], 0.5, derive_seed(s, "nbcs"));
                const FoldSet po = nb_count_split(data.counts, plan_of({0.5, 0.5}, {kInfinity}), derive_seed(s, "psplit"));
                const KSelectionResult pcs = select_k(po[0], po[1], 0.5, derive_seed(s, "pcs"));
                runs[static_cast<std::size_t>(d)] = {naive.k_selected, nbcs.k_selected, pcs.k_selected, naive.mse_by_k};
            }
            int nbcs_hit = 0, nbcs_over = 0, pcs_over = 0;
            std::vector<double> avg(10, 0.0);
            for (const auto& r : runs) {
                nbcs_hit += r.nbcs_k == k_star;
                nbcs_over += r.nbcs_k > k_star;
                pcs_over += r.pcs_k > k_star;
                for (std::size_t k = 0; k < 10; ++k) {
                    avg[k] += r.naive_mse[k] / 100.0;
                }
            }
            bool monotone = true;
            for (std::size_t k = 1; k < 10; ++k) {
                monotone = monotone && avg[k] <= avg[k - 1];
            }
            const bool cell_pass = nbcs_hit >= 70 && monotone && (tau != 5.0 || pcs_over > nbcs_over);
            pass = pass && cell_pass;
            detail += fmt("[K*=%zu tau=%g: NBCS correct %d%%, naive MSE %s, over-selection PCS %d%% vs NBCS %d%%] ",
                          k_star, tau, nbcs_hit, monotone ? "non-increasing" : "NOT monotone", pcs_over, nbcs_over);
        }
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 600.0;
    return {pass, detail + fmt("%.0f s (limit 600 s)", secs)};
}

// 6. Type 1 error of differential expression on null genes.
Outcome de_type1() {
    const auto t0 = Clock::now();
    const std::size_t per_tau = 250;
    std::vector<std::vector<double>> nbcs_p(2 * per_tau), naive_p(2 * per_tau);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t d = 0; d < static_cast<std::int64_t>(2 * per_tau); ++d) {
        const auto idx = static_cast<std::size_t>(d);
        const double tau = idx < per_tau ? 1.0 : 5.0;
        const double beta_star = 0.2 * static_cast<double>(idx % 16);
        const std::uint64_t s = derive_seed(derive_seed(kSeed, "c6"), idx);
        const SimDataset data = generate_dataset(500, 40, 2, beta_star, tau, derive_seed(s, "data"));
        const FoldSet f = nb_count_split(data.counts, plan_of({0.5, 0.5}, data.truth.b), derive_seed(s, "split"));
        const DeResult split = de_test(f[0], f[1], derive_seed(s, "nbcs"));
        const DeResult naive = de_test(data.counts, data.counts, derive_seed(s, "naive"));
        std::vector<std::uint8_t> is_de(40, 0);
        for (std::size_t j : data.truth.de_genes) {
            is_de[j] = 1;
        }
        for (std::size_t j = 0; j < 40; ++j) {
            if (!is_de[j]) {
                nbcs_p[idx].push_back(split.p_values[j]);
                naive_p[idx].push_back(naive.p_values[j]);
            }
        }
    }
    std::vector<double> nb_all, naive_all;
    for (std::size_t d = 0; d < nbcs_p.size(); ++d) {
        nb_all.insert(nb_all.end(), nbcs_p[d].begin(), nbcs_p[d].end());
        naive_all.insert(naive_all.end(), naive_p[d].begin(), naive_p[d].end());
    }
    const KsResult ks = ks_uniform(nb_all);
    const double naive_small =
        static_cast<double>(std::count_if(naive_all.begin(), naive_all.end(), [](double p) { return p < 0.05; })) /
        static_cast<double>(naive_all.size());
    const double nb_small =
        static_cast<double>(std::count_if(nb_all.begin(), nb_all.end(), [](double p) { return p < 0.05; })) /
        static_cast<double>(nb_all.size());
    const double secs = seconds_since(t0);
    const bool pass = ks.p_value >= 0.01 && naive_small > 0.10 && secs < 900.0;
    return {pass, fmt("NBCS-known: %zu null p-values, KS D %.4f p %.3f (>= 0.01), P(p<0.05) %.3f; naive P(p<0.05) "
                      "%.3f (> 0.10); %.0f s (limit 900 s)",
                      nb_all.size(), ks.statistic, ks.p_value, nb_small, naive_small, secs)};
}

// 7. Ten-fold NB cross-validation vs a single 90/10 split.
Outcome cv_vs_split() {
    const auto t0 = Clock::now();
    const std::vector<double> grid{1.0, 1.5, 2.0, 2.5, 3.0};
    const std::size_t reps = 200;
    bool pass = true;
    double sum_cv = 0.0, sum_split = 0.0;
    std::string detail;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<std::uint8_t> cv_hit(reps), split_hit(reps);
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t d = 0; d < static_cast<std::int64_t>(reps); ++d) {
            const std::uint64_t s = derive_seed(derive_seed(derive_seed(kSeed, "c7"), g), static_cast<std::uint64_t>(d));
            const SimDataset data = generate_dataset(500, 40, 3, grid[g], 1.0, derive_seed(s, "data"));
            const KSelectionResult cv = nbcv_select_k(data.counts, 10, data.truth.b, derive_seed(s, "nbcv"));
            const FoldSet f = nb_count_split(data.counts, plan_of({0.9, 0.1}, data.truth.b), derive_seed(s, "split"));
            const KSelectionResult sp = select_k(f[0], f[1], 0.9, derive_seed(s, "nbcs"));
            cv_hit[static_cast<std::size_t>(d)] = cv.k_selected == 3;
            split_hit[static_cast<std::size_t>(d)] = sp.k_selected == 3;
        }
        const double rate_cv = std::accumulate(cv_hit.begin(), cv_hit.end(), 0.0) / static_cast<double>(reps);
        const double rate_split = std::accumulate(split_hit.begin(), split_hit.end(), 0.0) / static_cast<double>(reps);
        pass = pass && rate_cv >= rate_split - 0.05;
        sum_cv += rate_cv;
        sum_split += rate_split;
        detail += fmt("b*=%g: %.3f vs %.3f; ", grid[g], rate_cv, rate_split);
    }
    const double mean_cv = sum_cv / static_cast<double>(grid.size());
    const double mean_split = sum_split / static_cast<double>(grid.size());
    pass = pass && mean_cv > mean_split;
    return {pass, fmt("correct-K rate NBCV(M=10) vs NBCS(eps=0.9): %smean %.3f vs %.3f; %.0f s", detail.c_str(),
                      mean_cv, mean_split, seconds_since(t0))};
}

// 8. Cluster-then-classify vs split-and-compare on homogeneous toy data.
Outcome intradataset_cv() {
    double diag = 0.0, ari_naive = 0.0, ari_split = 0.0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t seed = derive_seed(derive_seed(kSeed, "c8"), static_cast<std::uint64_t>(s));
        const CountMatrix toy = generate_toy(derive_seed(seed, "data"));
        const ConfusionResult naive = intradataset_cv_naive(toy, 5, 5, derive_seed(seed, "naive"));
        const ConfusionResult split = intradataset_cv_split(toy, 5, {5.0}, derive_seed(seed, "split"));
        diag += naive.diagonal_fraction() / seeds;
        ari_naive += naive.ari / seeds;
        ari_split += split.ari / seeds;
    }
    const bool pass = diag >= 0.85 && ari_naive >= 0.7 && ari_split <= 0.15;
    return {pass, fmt("naive on-diagonal %.3f (>= 0.85), naive ARI %.3f (>= 0.7), split ARI %.3f (<= 0.15) over %d seeds",
                      diag, ari_naive, ari_split, seeds)};
}

// 9. Recovery of 1/b from simulated data.
Outcome dispersion_recovery() {
    const SimDataset data = generate_dataset(1000, 200, 3, 1.5, 1.0, derive_seed(kSeed, "c9"));
    const DispersionEstimate est = estimate_dispersions(data.counts);
    std::vector<double> rel(data.truth.p);
    for (std::size_t j = 0; j < rel.size(); ++j) {
        const double truth = 1.0 / data.truth.b[j];
        const double hat = std::isinf(est.b_hat[j]) ? 0.0 : 1.0 / est.b_hat[j];
        rel[j] = std::abs(hat - truth) / truth;
    }
    std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2), rel.end());
    const double upper = rel[rel.size() / 2];
    const double lower = *std::max_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2));
    const double median = 0.5 * (upper + lower);
    return {median < 0.25, fmt("median relative error of 1/b_hat %.3f (< 0.25) over %zu genes", median, rel.size())};
}

// 10. Null calibration of Wald p-values and exact group means.
Outcome glm_calibration() {
    const std::size_t fits = 1000, n = 200;
    std::vector<double> ps(fits);
    std::vector<double> mean_dev(fits);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(fits); ++t) {
        const std::uint64_t s = derive_seed(derive_seed(kSeed, "c10"), static_cast<std::uint64_t>(t));
        const auto y = nb_column(n, 5.0, 2.0, derive_seed(s, "y"));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        RngStream r(derive_seed(s, "groups"), 0);
        for (std::size_t i = n - 1; i > 0; --i) {
            const auto j = std::min(i, static_cast<std::size_t>(r.uniform() * static_cast<double>(i + 1)));
            std::swap(order[i], order[j]);
        }
        Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 2);
        double sum0 = 0.0, sum1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool one = order[i] < n / 2;
            design(static_cast<Eigen::Index>(i), 1) = one ? 1.0 : 0.0;
            (one ? sum1 : sum0) += y[i];
        }
        const double m0 = sum0 / static_cast<double>(n - n / 2);
        const double m1 = sum1 / static_cast<double>(n / 2);
        const GlmFit fit = fit_nb_glm(y, design);
        ps[static_cast<std::size_t>(t)] = wald_pvalue(fit, 1).p_value;
        const double f0 = std::exp(fit.coefficients[0]);
        const double f1 = std::exp(fit.coefficients[0] + fit.coefficients[1]);
        mean_dev[static_cast<std::size_t>(t)] = std::max(std::abs(f0 - m0) / m0, std::abs(f1 - m1) / m1);
    }
    const KsResult ks = ks_uniform(ps);
    const double worst = *std::max_element(mean_dev.begin(), mean_dev.end());
    const bool pass = ks.p_value >= 0.01 && worst <= 1e-8;
    return {pass, fmt("KS of %zu slope p-values D %.4f p %.3f (>= 0.01); worst relative group-mean error %.1e (<= 1e-8)",
                      fits, ks.statistic, ks.p_value, worst)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"exact additivity", exact_additivity},
        {"fold correlation curve", correlation_curve},
        {"fold marginals with b' = b", fold_marginals},
        {"Fisher information split", fisher_split},
        {"K selection on simulated data", k_selection},
        {"DE Type 1 error", de_type1},
        {"10-fold CV vs single split", cv_vs_split},
        {"intradataset cross-validation", intradataset_cv},
        {"dispersion recovery", dispersion_recovery},
        {"GLM calibration", glm_calibration},
    };
    std::vector<std::size_t> chosen;
    for (int a = 1; a < argc; ++a) {
        const long v = std::strtol(argv[a], nullptr, 10);
        if (v < 1 || v > static_cast<long>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[a]);
            return 2;
        }
        chosen.push_back(static_cast<std::size_t>(v));
    }
    if (chosen.empty()) {
        chosen.resize(criteria.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{1});
    }
    int failed = 0;
    for (std::size_t c : chosen) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[c - 1].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %zu. %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c, criteria[c - 1].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
