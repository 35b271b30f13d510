#include "countthin/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "countthin/errors.hpp"
#include "countthin/rng.hpp"

namespace countthin {

namespace {

inline double sq_dist(const double* a, const double* b, std::size_t p) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// Index of the first element whose running total exceeds u * total.
std::size_t weighted_pick(const std::vector<double>& w, double total, double u) {
    const double target = u * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            acc += w[i];
            last_positive = i;
            if (acc > target) {
                return i;
            }
        }
    }
    return last_positive;
}

void seed_plus_plus(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k, RngStream& rng,
                    std::vector<double>& centroids) {
    centroids.assign(k * p, 0.0);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    auto first = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    first = std::min(first, n - 1);
    std::copy_n(data.data() + first * p, p, centroids.data());
    for (std::size_t c = 1; c < k; ++c) {
        const double* prev = centroids.data() + (c - 1) * p;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(data.data() + i * p, prev, p));
            total += d2[i];
        }
        std::size_t pick;
        if (total > 0.0) {
            pick = weighted_pick(d2, total, rng.uniform());
        } else {
            pick = std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1);
        }
        std::copy_n(data.data() + pick * p, p, centroids.data() + c * p);
    }
}

// Assigns every point to its nearest centroid. Records the distance to it
// (`upper`) and to every centroid (`lower`, n x k). Returns whether any label changed.
// Centroids are transposed (p x k) so the inner loop runs across centroids.
bool assign_full(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k,
                 const std::vector<double>& centroids, std::vector<Label>& labels, std::vector<double>& upper,
                 std::vector<double>& lower) {
    std::vector<double> ct(p * k);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < p; ++j) {
            ct[j * k + c] = centroids[c * p + j];
        }
    }
    std::vector<double> d(k);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = data.data() + i * p;
        std::fill(d.begin(), d.end(), 0.0);
        for (std::size_t j = 0; j < p; ++j) {
            const double xj = x[j];
            const double* cj = ct.data() + j * k;
            for (std::size_t c = 0; c < k; ++c) {
                const double diff = xj - cj[c];
                d[c] += diff * diff;
            }
        }
        // Ties keep the current label so reseeded clusters stay populated.
        Label arg = labels[i] < k ? labels[i] : 0;
        double best = d[arg];
        for (std::size_t c = 0; c < k; ++c) {
            if (d[c] < best) {
                best = d[c];
                arg = static_cast<Label>(c);
            }
            lower[i * k + c] = std::sqrt(d[c]);
        }
        changed = changed || labels[i] != arg;
        labels[i] = arg;
        upper[i] = std::sqrt(best);
    }
    return changed;
}

// One Elkan pass after the centroids moved from `old`: distances that the
// triangle inequality rules out are skipped. Same labels as a full scan.
bool assign_bounded(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k,
                    const std::vector<double>& old, const std::vector<double>& centroids, std::vector<Label>& labels,
                    std::vector<double>& upper, std::vector<double>& lower) {
    std::vector<double> shift(k), gap(k * k, 0.0), half_min(k, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < k; ++c) {
        shift[c] = std::sqrt(sq_dist(old.data() + c * p, centroids.data() + c * p, p));
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t e = c + 1; e < k; ++e) {
            const double g = 0.5 * std::sqrt(sq_dist(centroids.data() + c * p, centroids.data() + e * p, p));
            gap[c * k + e] = gap[e * k + c] = g;
            half_min[c] = std::min(half_min[c], g);
            half_min[e] = std::min(half_min[e], g);
        }
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
        double* lo = lower.data() + i * k;
        for (std::size_t c = 0; c < k; ++c) {
            lo[c] = std::max(0.0, lo[c] - shift[c]);
        }
        Label a = labels[i];
        double u = upper[i] + shift[a];
        if (u < half_min[a]) {
            upper[i] = u;
            continue;
        }
        const double* x = data.data() + i * p;
        bool exact = false;
        for (std::size_t c = 0; c < k; ++c) {
            if (c == a || u < lo[c] || u < gap[a * k + c]) {
                continue;
            }
            if (!exact) {
                u = std::sqrt(sq_dist(x, centroids.data() + a * p, p));
                lo[a] = u;
                exact = true;
                if (u < lo[c] || u < gap[a * k + c]) {
                    continue;
                }
            }
            const double dc = std::sqrt(sq_dist(x, centroids.data() + c * p, p));
            lo[c] = dc;
            if (dc < u) {
                a = static_cast<Label>(c);
                u = dc;
            }
        }
        changed = changed || labels[i] != a;
        labels[i] = a;
        upper[i] = u;
    }
    return changed;
}

// Recomputes centroids; returns the index of an empty cluster or k if none.
std::size_t update(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k,
                   const std::vector<Label>& labels, std::vector<double>& centroids, std::vector<std::size_t>& sizes) {
    std::vector<double> sums(k * p, 0.0);
    sizes.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = labels[i];
        ++sizes[c];
        const double* x = data.data() + i * p;
        double* s = sums.data() + c * p;
        for (std::size_t j = 0; j < p; ++j) {
            s[j] += x[j];
        }
    }
    std::size_t empty = k;
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0) {
            empty = std::min(empty, c);
            continue;
        }
        const double inv = 1.0 / static_cast<double>(sizes[c]);
        for (std::size_t j = 0; j < p; ++j) {
            centroids[c * p + j] = sums[c * p + j] * inv;
        }
    }
    return empty;
}

ClusterModel lloyd(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k, RngStream& rng,
                   int max_iterations) {
    ClusterModel m;
    m.k = k;
    m.p = p;
    seed_plus_plus(data, n, p, k, rng, m.centroids);
    m.assignments.assign(n, 0);
    std::vector<double> upper(n), lower(n * k), old;
    std::vector<std::size_t> sizes;
    assign_full(data, n, p, k, m.centroids, m.assignments, upper, lower);
    for (int it = 0; it < max_iterations; ++it) {
        old = m.centroids;
        std::size_t empty = update(data, n, p, k, m.assignments, m.centroids, sizes);
        bool changed;
        if (empty == k) {
            changed = assign_bounded(data, n, p, k, old, m.centroids, m.assignments, upper, lower);
        } else {
            // Move the worst-fit point of a cluster with spare members into each empty cluster.
            std::vector<double> dist(n);
            for (std::size_t i = 0; i < n; ++i) {
                dist[i] = sq_dist(data.data() + i * p, m.centroids.data() + m.assignments[i] * p, p);
            }
            int guard = 0;
            while (empty < k && guard++ < static_cast<int>(k)) {
                std::size_t far = n;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (sizes[m.assignments[i]] > 1 && dist[i] > far_d) {
                        far_d = dist[i];
                        far = i;
                    }
                }
                if (far == n) {
                    break;
                }
                --sizes[m.assignments[far]];
                m.assignments[far] = static_cast<Label>(empty);
                dist[far] = 0.0;
                empty = update(data, n, p, k, m.assignments, m.centroids, sizes);
            }
            changed = assign_full(data, n, p, k, m.centroids, m.assignments, upper, lower);
        }
        if (!changed) {
            break;
        }
    }
    update(data, n, p, k, m.assignments, m.centroids, sizes);
    m.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m.inertia += sq_dist(data.data() + i * p, m.centroids.data() + m.assignments[i] * p, p);
    }
    return m;
}

double comb2(double x) {
    return 0.5 * x * (x - 1.0);
}

// Maps arbitrary label values to 0..K-1 in order of first appearance.
std::vector<std::size_t> compact(std::span<const Label> labels, std::size_t& k) {
    std::map<Label, std::size_t> ids;
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = ids.emplace(labels[i], ids.size());
        out[i] = it->second;
    }
    k = ids.size();
    return out;
}

}  // namespace

ClusterModel kmeans(std::span<const double> data, std::size_t n, std::size_t p, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
    if (k == 0 || k > n) {
        throw InvalidParameter("kmeans: K = " + std::to_string(k) + " must lie in [1, n = " + std::to_string(n) + "]");
    }
    if (data.size() != n * p) {
        throw InvalidInput("kmeans: data size does not match n x p");
    }
    if (options.restarts < 1 || options.max_iterations < 1) {
        throw InvalidParameter("kmeans: restarts and max_iterations must be positive");
    }
    ClusterModel best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.restarts; ++r) {
        RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(r)), 0);
        ClusterModel m = lloyd(data, n, p, k, rng, options.max_iterations);
        if (m.inertia < best.inertia) {
            best = std::move(m);
        }
    }
    best.restarts_used = options.restarts;
    return best;
}

ClusterModel kmeans_log(const CountMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const std::vector<double> data = log1p_dense(x);
    return kmeans(data, x.rows(), x.cols(), k, seed, options);
}

double adjusted_rand_index(std::span<const Label> a, std::span<const Label> b) {
    if (a.size() != b.size()) {
        throw InvalidInput("adjusted_rand_index: label vectors differ in length");
    }
    const std::size_t n = a.size();
    std::size_t ka = 0, kb = 0;
    const auto ca = compact(a, ka);
    const auto cb = compact(b, kb);
    std::vector<double> table(ka * kb, 0.0), ra(ka, 0.0), rb(kb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        table[ca[i] * kb + cb[i]] += 1.0;
        ra[ca[i]] += 1.0;
        rb[cb[i]] += 1.0;
    }
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (double v : table) {
        index += comb2(v);
    }
    for (double v : ra) {
        sa += comb2(v);
    }
    for (double v : rb) {
        sb += comb2(v);
    }
    const double total = comb2(static_cast<double>(n));
    if (total == 0.0) {
        return 1.0;
    }
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    const double denom = max_index - expected;
    if (denom == 0.0) {
        return 1.0;
    }
    return (index - expected) / denom;
}

std::vector<std::size_t> confusion_matrix(std::span<const Label> a, std::span<const Label> b, std::size_t rows,
                                          std::size_t cols) {
    if (a.size() != b.size()) {
        throw InvalidInput("confusion_matrix: label vectors differ in length");
    }
    std::vector<std::size_t> m(rows * cols, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] >= rows || b[i] >= cols) {
            throw InvalidInput("confusion_matrix: label out of range");
        }
        ++m[a[i] * cols + b[i]];
    }
    return m;
}

std::vector<std::size_t> best_diagonal_permutation(std::span<const std::size_t> matrix, std::size_t rows,
                                                   std::size_t cols) {
    if (rows != cols) {
        throw InvalidInput("best_diagonal_permutation: matrix is " + std::to_string(rows) + " x " +
                           std::to_string(cols) + ", not square");
    }
    if (matrix.size() != rows * cols) {
        throw InvalidInput("best_diagonal_permutation: matrix size does not match its shape");
    }
    const std::size_t k = rows;
    if (k == 0) {
        return {};
    }
    // Minimize -matrix with the O(k^3) potential-based Hungarian method (1-based internals).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
    std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
    std::vector<char> used(k + 1);
    auto cost = [&](std::size_t r, std::size_t c) { return -static_cast<double>(matrix[(r - 1) * k + (c - 1)]); };
    for (std::size_t r = 1; r <= k; ++r) {
        match[0] = r;
        std::size_t c0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[c0] = 1;
            const std::size_t r0 = match[c0];
            double delta = inf;
            std::size_t c1 = 0;
            for (std::size_t c = 1; c <= k; ++c) {
                if (used[c]) {
                    continue;
                }
                const double cur = cost(r0, c) - u[r0] - v[c];
                if (cur < minv[c]) {
                    minv[c] = cur;
                    way[c] = c0;
                }
                if (minv[c] < delta) {
                    delta = minv[c];
                    c1 = c;
                }
            }
            for (std::size_t c = 0; c <= k; ++c) {
                if (used[c]) {
                    u[match[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            c0 = c1;
        } while (match[c0] != 0);
        do {
            const std::size_t c1 = way[c0];
            match[c0] = match[c1];
            c0 = c1;
        } while (c0 != 0);
    }
    std::vector<std::size_t> perm(k);
    for (std::size_t c = 1; c <= k; ++c) {
        perm[match[c] - 1] = c - 1;
    }
    return perm;
}

}  // namespace countthin
