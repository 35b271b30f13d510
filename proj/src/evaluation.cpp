#include "countthin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "countthin/errors.hpp"
#include "countthin/glm.hpp"
#include "countthin/rng.hpp"
#include "countthin/special.hpp"

namespace countthin {

namespace {

void require_same_shape(const CountMatrix& a, const CountMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidInput(std::string(what) + ": train is " + std::to_string(a.rows()) + " x " +
                           std::to_string(a.cols()) + " but test is " + std::to_string(b.rows()) + " x " +
                           std::to_string(b.cols()));
    }
}

std::vector<double> dense_doubles(const CountMatrix& x) {
    std::vector<double> out(x.rows() * x.cols(), 0.0);
    const std::size_t p = x.cols();
    x.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { out[i * p + j] = v; });
    return out;
}

// Eq. (2)-style error with precomputed raw train values and log test values.
double mse_from_dense(const std::vector<double>& train, const std::vector<double>& log_test, std::size_t n,
                      std::size_t p, std::span<const Label> labels, std::size_t k, double scale) {
    std::vector<double> sums(k * p, 0.0);
    std::vector<double> sizes(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = labels[i];
        sizes[c] += 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            sums[c * p + j] += train[i * p + j];
        }
    }
    // log(scale * mean + 1) per (cluster, gene); empty clusters are never referenced.
    std::vector<double> log_pred(k * p, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < p; ++j) {
            log_pred[c * p + j] = std::log1p(scale * sums[c * p + j] / sizes[c]);
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* pred = log_pred.data() + labels[i] * p;
        const double* obs = log_test.data() + i * p;
        for (std::size_t j = 0; j < p; ++j) {
            const double d = obs[j] - pred[j];
            total += d * d;
        }
    }
    return total / (static_cast<double>(n) * static_cast<double>(p));
}

void check_eps(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) {
        throw InvalidParameter("eps must lie in (0, 1), got " + std::to_string(eps));
    }
}

std::size_t check_k_max(const SelectOptions& options, std::size_t n) {
    if (options.k_max == 0) {
        throw InvalidParameter("k_max must be at least 1");
    }
    if (options.k_max > n) {
        throw InvalidParameter("k_max = " + std::to_string(options.k_max) + " exceeds the number of cells " +
                               std::to_string(n));
    }
    return options.k_max;
}

// Labels for held-out rows from nearest centroids among `present` clusters.
Label nearest_centroid(const double* x, const std::vector<double>& centroids, const std::vector<char>& present,
                       std::size_t p) {
    double best = std::numeric_limits<double>::infinity();
    Label arg = 0;
    for (std::size_t c = 0; c < present.size(); ++c) {
        if (!present[c]) {
            continue;
        }
        double d = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double t = x[j] - centroids[c * p + j];
            d += t * t;
        }
        if (d < best) {
            best = d;
            arg = static_cast<Label>(c);
        }
    }
    return arg;
}

}  // namespace

std::size_t argmin_k(std::span<const double> mse_by_k) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < mse_by_k.size(); ++k) {
        if (mse_by_k[k] < mse_by_k[best]) {
            best = k;
        }
    }
    return best + 1;
}

double heldout_mse(const CountMatrix& train, const CountMatrix& test, std::span<const Label> labels, std::size_t k,
                   double scale) {
    require_same_shape(train, test, "heldout_mse");
    if (labels.size() != train.rows()) {
        throw InvalidInput("heldout_mse: one label per row required");
    }
    for (Label l : labels) {
        if (l >= k) {
            throw InvalidInput("heldout_mse: label out of range");
        }
    }
    return mse_from_dense(dense_doubles(train), log1p_dense(test), train.rows(), train.cols(), labels, k, scale);
}

KSelectionResult select_k(const CountMatrix& train, const CountMatrix& test, double eps, std::uint64_t seed,
                          const SelectOptions& options) {
    require_same_shape(train, test, "select_k");
    check_eps(eps);
    const std::size_t n = train.rows();
    const std::size_t p = train.cols();
    const std::size_t k_max = check_k_max(options, n);
    const std::vector<double> raw = dense_doubles(train);
    const std::vector<double> log_train = log1p_dense(train);
    const std::vector<double> log_test = log1p_dense(test);
    const double scale = (1.0 - eps) / eps;

    KSelectionResult res;
    res.eps_used = eps;
    res.mse_by_k.assign(k_max, 0.0);
    const auto kk = static_cast<std::int64_t>(k_max);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t q = 0; q < kk; ++q) {
        const auto k = static_cast<std::size_t>(q) + 1;
        const ClusterModel m = kmeans(log_train, n, p, k, derive_seed(seed, static_cast<std::uint64_t>(k)), options.kmeans);
        res.mse_by_k[k - 1] = mse_from_dense(raw, log_test, n, p, m.assignments, k, scale);
    }
    res.k_selected = argmin_k(res.mse_by_k);
    return res;
}

KSelectionResult nbcv_select_k(const FoldSet& folds, std::uint64_t seed, const SelectOptions& options) {
    const std::size_t m_folds = folds.size();
    if (m_folds < 2) {
        throw InvalidParameter("nbcv_select_k: need at least two folds");
    }
    KSelectionResult total;
    for (std::size_t m = 0; m < m_folds; ++m) {
        const CountMatrix train = fold_complement(folds, m);
        const double eps = 1.0 - folds.plan.eps[m];
        const KSelectionResult r = select_k(train, folds[m], eps, derive_seed(seed, static_cast<std::uint64_t>(m)), options);
        if (total.mse_by_k.empty()) {
            total.mse_by_k.assign(r.mse_by_k.size(), 0.0);
        }
        for (std::size_t k = 0; k < r.mse_by_k.size(); ++k) {
            total.mse_by_k[k] += r.mse_by_k[k];
        }
    }
    total.eps_used = static_cast<double>(m_folds - 1) / static_cast<double>(m_folds);
    total.k_selected = argmin_k(total.mse_by_k);
    return total;
}

KSelectionResult nbcv_select_k(const CountMatrix& x, std::size_t m_folds, std::vector<double> b_prime,
                               std::uint64_t seed, const SelectOptions& options) {
    if (m_folds < 2) {
        throw InvalidParameter("nbcv_select_k: M must be at least 2");
    }
    const FoldSet folds = nb_count_split(x, ThinPlan::equal(m_folds, std::move(b_prime)), derive_seed(seed, "split"));
    return nbcv_select_k(folds, derive_seed(seed, "select"), options);
}

DeResult de_test_with_labels(const CountMatrix& test, std::span<const Label> labels) {
    const std::size_t n = test.rows();
    const std::size_t p = test.cols();
    if (labels.size() != n) {
        throw InvalidInput("de_test: one label per row required");
    }
    DeResult res;
    res.labels.assign(labels.begin(), labels.end());
    res.p_values.assign(p, 1.0);
    res.warning.assign(p, 1);

    std::size_t ones = 0;
    for (Label l : labels) {
        if (l > 1) {
            throw InvalidInput("de_test: labels must be 0 or 1");
        }
        ones += l;
    }
    if (ones < 2 || n - ones < 2) {
        return res;
    }

    Eigen::MatrixXd design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        design(static_cast<Eigen::Index>(i), 1) = labels[i];
    }
    const auto genes = static_cast<std::int64_t>(p);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t g = 0; g < genes; ++g) {
        const auto j = static_cast<std::size_t>(g);
        const std::vector<Count> y = test.column(j);
        try {
            const GlmFit fit = fit_nb_glm(y, design);
            const WaldPValue w = wald_pvalue(fit, 1);
            res.p_values[j] = w.p_value;
            res.warning[j] = w.warning;
        } catch (const std::exception&) {
            res.p_values[j] = 1.0;
            res.warning[j] = 1;
        }
    }
    return res;
}

DeResult de_test(const CountMatrix& train, const CountMatrix& test, std::uint64_t seed, const KMeansOptions& options) {
    require_same_shape(train, test, "de_test");
    if (train.rows() < 4) {
        throw InvalidInput("de_test: need at least four cells");
    }
    const ClusterModel m = kmeans_log(train, 2, seed, options);
    return de_test_with_labels(test, m.assignments);
}

double ConfusionResult::diagonal_fraction() const {
    std::size_t diag = 0, total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            total += at(r, c);
            if (r == c) {
                diag += permuted_at(r, c);
            }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(total);
}

ConfusionResult make_confusion(std::vector<Label> a, std::vector<Label> b, std::size_t rows, std::size_t cols) {
    ConfusionResult res;
    res.rows = rows;
    res.cols = cols;
    res.matrix = confusion_matrix(a, b, rows, cols);
    if (rows == cols) {
        res.permutation = best_diagonal_permutation(res.matrix, rows, cols);
    } else {
        res.permutation.resize(cols);
        std::iota(res.permutation.begin(), res.permutation.end(), std::size_t{0});
    }
    res.ari = adjusted_rand_index(a, b);
    res.labels_a = std::move(a);
    res.labels_b = std::move(b);
    return res;
}

ConfusionResult intradataset_cv_naive(const CountMatrix& x, std::size_t k, std::size_t n_folds, std::uint64_t seed,
                                      const KMeansOptions& options) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n_folds < 2 || n_folds > n) {
        throw InvalidParameter("intradataset_cv_naive: need 2 <= folds <= n");
    }
    const std::vector<double> data = log1p_dense(x);
    const ClusterModel model = kmeans(data, n, p, k, derive_seed(seed, "cluster"), options);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(derive_seed(seed, "folds"), 0);
    for (std::size_t i = n; i > 1; --i) {
        const auto r = std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(i)), i - 1);
        std::swap(order[i - 1], order[r]);
    }
    std::vector<std::size_t> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        fold_of[order[pos]] = pos % n_folds;
    }

    bool missing = false;
    std::vector<Label> predicted(n, 0);
    for (std::size_t f = 0; f < n_folds; ++f) {
        std::vector<double> centroids(k * p, 0.0);
        std::vector<double> sizes(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) {
                continue;
            }
            const std::size_t c = model.assignments[i];
            sizes[c] += 1.0;
            for (std::size_t j = 0; j < p; ++j) {
                centroids[c * p + j] += data[i * p + j];
            }
        }
        std::vector<char> present(k, 0);
        for (std::size_t c = 0; c < k; ++c) {
            present[c] = sizes[c] > 0.0;
            missing = missing || !present[c];
            for (std::size_t j = 0; j < p && present[c]; ++j) {
                centroids[c * p + j] /= sizes[c];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) {
                predicted[i] = nearest_centroid(data.data() + i * p, centroids, present, p);
            }
        }
    }
    ConfusionResult res = make_confusion(model.assignments, std::move(predicted), k, k);
    res.missing_label = missing;
    return res;
}

ConfusionResult intradataset_cv_split(const CountMatrix& x, std::size_t k, std::vector<double> b_prime,
                                      std::uint64_t seed, const KMeansOptions& options) {
    ThinPlan plan;
    plan.eps = {0.5, 0.5};
    plan.b_prime = std::move(b_prime);
    const FoldSet folds = nb_count_split(x, plan, derive_seed(seed, "split"));
    const ClusterModel a = kmeans_log(folds[0], k, derive_seed(seed, "cluster1"), options);
    const ClusterModel b = kmeans_log(folds[1], k, derive_seed(seed, "cluster2"), options);
    return make_confusion(a.assignments, b.assignments, k, k);
}

std::vector<Label> transfer_labels_knn(const CountMatrix& train, std::span<const Label> train_labels,
                                       const CountMatrix& test, std::size_t neighbors) {
    if (train.cols() != test.cols()) {
        throw InvalidInput("transfer_labels_knn: train and test differ in columns");
    }
    if (train_labels.size() != train.rows()) {
        throw InvalidInput("transfer_labels_knn: one label per training row required");
    }
    if (neighbors == 0 || neighbors > train.rows()) {
        throw InvalidParameter("transfer_labels_knn: neighbors must lie in [1, training rows]");
    }
    const std::size_t p = train.cols();
    const std::vector<double> a = log1p_dense(train);
    const std::vector<double> b = log1p_dense(test);
    std::vector<Label> out(test.rows());
    std::vector<std::pair<double, std::size_t>> dist(train.rows());
    for (std::size_t t = 0; t < test.rows(); ++t) {
        for (std::size_t r = 0; r < train.rows(); ++r) {
            double d = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double e = b[t * p + j] - a[r * p + j];
                d += e * e;
            }
            dist[r] = {d, r};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(neighbors), dist.end());
        // Majority vote; the nearest neighbour's label wins ties.
        Label best = train_labels[dist[0].second];
        std::size_t best_votes = 0;
        for (std::size_t q = 0; q < neighbors; ++q) {
            const Label l = train_labels[dist[q].second];
            std::size_t votes = 0;
            for (std::size_t s = 0; s < neighbors; ++s) {
                votes += train_labels[dist[s].second] == l;
            }
            if (votes > best_votes) {
                best_votes = votes;
                best = l;
            }
        }
        out[t] = best;
    }
    return out;
}

namespace {

void check_sample_split(const CountMatrix& x) {
    if (x.rows() < 8 || x.rows() % 2 != 0) {
        throw InvalidInput("sample splitting needs an even number of cells, at least 8; got " +
                           std::to_string(x.rows()));
    }
}

}  // namespace

KSelectionResult sample_split_select_k(const CountMatrix& x, std::uint64_t seed, const SelectOptions& options) {
    check_sample_split(x);
    const std::size_t half = x.rows() / 2;
    const CountMatrix train = x.slice_rows(0, half);
    const CountMatrix test = x.slice_rows(half, x.rows());
    const std::size_t p = x.cols();
    const std::size_t k_max = check_k_max(options, half);
    const std::vector<double> raw = dense_doubles(train);
    const std::vector<double> log_train = log1p_dense(train);
    const std::vector<double> log_test = log1p_dense(test);

    KSelectionResult res;
    res.eps_used = 0.5;
    res.mse_by_k.assign(k_max, 0.0);
    for (std::size_t k = 1; k <= k_max; ++k) {
        const ClusterModel m = kmeans(log_train, half, p, k, derive_seed(seed, static_cast<std::uint64_t>(k)), options.kmeans);
        const std::vector<Label> test_labels = transfer_labels_knn(train, m.assignments, test);
        // Cluster means come from training rows; the held-out rows are scored without rescaling.
        std::vector<double> sums(k * p, 0.0), sizes(k, 0.0);
        for (std::size_t i = 0; i < half; ++i) {
            sizes[m.assignments[i]] += 1.0;
            for (std::size_t j = 0; j < p; ++j) {
                sums[m.assignments[i] * p + j] += raw[i * p + j];
            }
        }
        double total = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            const std::size_t c = test_labels[i];
            for (std::size_t j = 0; j < p; ++j) {
                const double d = log_test[i * p + j] - std::log1p(sums[c * p + j] / sizes[c]);
                total += d * d;
            }
        }
        res.mse_by_k[k - 1] = total / (static_cast<double>(half) * static_cast<double>(p));
    }
    res.k_selected = argmin_k(res.mse_by_k);
    return res;
}

DeResult sample_split_de(const CountMatrix& x, std::uint64_t seed, const KMeansOptions& options) {
    check_sample_split(x);
    const std::size_t half = x.rows() / 2;
    const CountMatrix train = x.slice_rows(0, half);
    const CountMatrix test = x.slice_rows(half, x.rows());
    const ClusterModel m = kmeans_log(train, 2, seed, options);
    const std::vector<Label> labels = transfer_labels_knn(train, m.assignments, test);
    return de_test_with_labels(test, labels);
}

KsResult ks_uniform(std::span<const double> values) {
    if (values.empty()) {
        throw InvalidInput("ks_uniform: no values");
    }
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = std::clamp(v[i], 0.0, 1.0);
        d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
    }
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    return {d, kolmogorov_survival(lambda)};
}

}  // namespace countthin
