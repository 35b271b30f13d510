#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "countthin/clustering.hpp"
#include "countthin/errors.hpp"
#include "countthin/rng.hpp"
#include "countthin/simgen.hpp"

using namespace countthin;

namespace {

// ARI from explicit pair counting, O(n^2).
double ari_by_pairs(const std::vector<Label>& a, const std::vector<Label>& b) {
    double both = 0.0, only_a = 0.0, only_b = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j];
            const bool sb = b[i] == b[j];
            both += sa && sb;
            only_a += sa;
            only_b += sb;
            pairs += 1.0;
        }
    }
    const double expected = only_a * only_b / pairs;
    const double max_index = 0.5 * (only_a + only_b);
    return (both - expected) / (max_index - expected);
}

std::size_t diagonal(const std::vector<std::size_t>& m, const std::vector<std::size_t>& perm, std::size_t k) {
    std::size_t s = 0;
    for (std::size_t r = 0; r < k; ++r) {
        s += m[r * k + perm[r]];
    }
    return s;
}

}  // namespace

TEST_CASE("ARI matches pair counting", "[ari]") {
    const std::vector<Label> a{0, 0, 1, 1, 2, 2};
    const std::vector<Label> b{0, 0, 1, 2, 2, 2};
    CHECK(adjusted_rand_index(a, b) == Catch::Approx(ari_by_pairs(a, b)).epsilon(1e-12));
    CHECK(adjusted_rand_index(a, b) == Catch::Approx(0.4444444444444444).epsilon(1e-12));

    for (std::uint64_t s = 0; s < 20; ++s) {
        RngStream r(s, 0);
        std::vector<Label> x(60), y(60);
        for (std::size_t i = 0; i < 60; ++i) {
            x[i] = static_cast<Label>(r.uniform() * 4);
            y[i] = r.uniform() < 0.6 ? x[i] : static_cast<Label>(r.uniform() * 3);
        }
        const double v = adjusted_rand_index(x, y);
        CHECK(v == Catch::Approx(ari_by_pairs(x, y)).epsilon(1e-10));
        CHECK(v == Catch::Approx(adjusted_rand_index(y, x)).epsilon(1e-14));
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        // Relabel x by a fixed permutation.
        std::vector<Label> relabeled(60);
        const Label perm[] = {3, 0, 2, 1};
        for (std::size_t i = 0; i < 60; ++i) {
            relabeled[i] = perm[x[i]] + 10;
        }
        CHECK(adjusted_rand_index(relabeled, y) == Catch::Approx(v).epsilon(1e-12));
        CHECK(adjusted_rand_index(relabeled, x) == Catch::Approx(1.0));
    }
}

TEST_CASE("ARI edge cases", "[ari]") {
    const std::vector<Label> same(10, 3);
    CHECK(adjusted_rand_index(same, same) == 1.0);
    std::vector<Label> distinct(10);
    std::iota(distinct.begin(), distinct.end(), Label{0});
    CHECK(adjusted_rand_index(distinct, distinct) == 1.0);
    CHECK_THROWS_AS(adjusted_rand_index(same, std::vector<Label>(3, 0)), InvalidInput);
}

TEST_CASE("optimal diagonal permutation", "[hungarian]") {
    const std::vector<std::size_t> eye{9, 1, 0, 2, 8, 1, 0, 0, 7};
    CHECK(best_diagonal_permutation(eye, 3, 3) == std::vector<std::size_t>{0, 1, 2});

    const std::vector<std::size_t> swapped{0, 5, 0, 6, 0, 0, 0, 0, 4};
    CHECK(best_diagonal_permutation(swapped, 3, 3) == std::vector<std::size_t>{1, 0, 2});

    for (std::size_t k : {4U, 6U}) {
        for (std::uint64_t s = 0; s < 30; ++s) {
            RngStream r(100 + s, k);
            std::vector<std::size_t> m(k * k);
            for (auto& v : m) {
                v = static_cast<std::size_t>(r.uniform() * 50);
            }
            std::vector<std::size_t> perm(k);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::size_t brute = 0;
            do {
                brute = std::max(brute, diagonal(m, perm, k));
            } while (std::next_permutation(perm.begin(), perm.end()));
            const auto got = best_diagonal_permutation(m, k, k);
            std::vector<std::size_t> sorted = got;
            std::sort(sorted.begin(), sorted.end());
            std::vector<std::size_t> ident(k);
            std::iota(ident.begin(), ident.end(), std::size_t{0});
            REQUIRE(sorted == ident);
            CHECK(diagonal(m, got, k) == brute);
        }
    }
    CHECK_THROWS_AS(best_diagonal_permutation(std::vector<std::size_t>(6, 1), 2, 3), InvalidInput);
}

TEST_CASE("confusion matrix counts", "[confusion]") {
    const std::vector<Label> a{0, 0, 1, 1, 1};
    const std::vector<Label> b{1, 1, 0, 0, 1};
    const auto m = confusion_matrix(a, b, 2, 2);
    CHECK(m == std::vector<std::size_t>{0, 2, 2, 1});
    CHECK(std::accumulate(m.begin(), m.end(), std::size_t{0}) == 5);
    CHECK_THROWS_AS(confusion_matrix(a, b, 1, 2), InvalidInput);
}

TEST_CASE("k-means with one cluster", "[kmeans]") {
    const std::vector<double> x{1, 2, 3, 4, 5, 9, 7, 0};
    const ClusterModel m = kmeans(x, 4, 2, 1, 1);
    CHECK(m.centroids[0] == Catch::Approx(4.0));
    CHECK(m.centroids[1] == Catch::Approx(3.75));
    double inertia = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        inertia += std::pow(x[2 * i] - 4.0, 2) + std::pow(x[2 * i + 1] - 3.75, 2);
    }
    CHECK(m.inertia == Catch::Approx(inertia));
    CHECK(std::all_of(m.assignments.begin(), m.assignments.end(), [](Label l) { return l == 0; }));
}

TEST_CASE("k-means separates point masses", "[kmeans]") {
    std::vector<double> x;
    std::vector<Label> truth;
    for (std::size_t i = 0; i < 40; ++i) {
        const bool right = i % 3 == 0;
        x.push_back(right ? 10.0 : 0.0);
        x.push_back(right ? 10.0 : 0.0);
        truth.push_back(right);
    }
    const ClusterModel m = kmeans(x, 40, 2, 2, 7);
    CHECK(adjusted_rand_index(m.assignments, truth) == 1.0);
    CHECK(m.inertia == 0.0);
}

TEST_CASE("k-means labels are valid and centroids are member means", "[kmeans]") {
    const CountMatrix toy = generate_toy(3);
    for (std::size_t k : {2U, 5U, 10U}) {
        const ClusterModel m = kmeans_log(toy, k, 11);
        const std::vector<double> data = log1p_dense(toy);
        std::vector<double> sums(k * 2, 0.0), sizes(k, 0.0);
        for (std::size_t i = 0; i < 100; ++i) {
            REQUIRE(m.assignments[i] < k);
            sizes[m.assignments[i]] += 1;
            sums[m.assignments[i] * 2] += data[2 * i];
            sums[m.assignments[i] * 2 + 1] += data[2 * i + 1];
        }
        for (std::size_t c = 0; c < k; ++c) {
            REQUIRE(sizes[c] > 0);
            CHECK(m.centroids[c * 2] == Catch::Approx(sums[c * 2] / sizes[c]));
            CHECK(m.centroids[c * 2 + 1] == Catch::Approx(sums[c * 2 + 1] / sizes[c]));
        }
    }
}

TEST_CASE("ten restarts reach the best inertia on tiny data", "[kmeans]") {
    std::vector<double> x(60);
    for (std::size_t e = 0; e < 60; ++e) {
        RngStream r(21, e);
        x[e] = std::log1p(static_cast<double>(sample_nb({5.0, 5.0}, r)));
    }
    for (std::size_t k : {2U, 3U}) {
        const ClusterModel few = kmeans(x, 30, 2, k, 5);
        KMeansOptions many;
        many.restarts = 1000;
        const ClusterModel lots = kmeans(x, 30, 2, k, 5, many);
        CHECK(std::abs(few.inertia - lots.inertia) < 1e-9);
    }
}

TEST_CASE("k-means is deterministic and validates K", "[kmeans]") {
    const CountMatrix toy = generate_toy(4);
    const ClusterModel a = kmeans_log(toy, 4, 99);
    const ClusterModel b = kmeans_log(toy, 4, 99);
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
    CHECK_THROWS_AS(kmeans_log(toy, 0, 1), InvalidParameter);
    CHECK_THROWS_AS(kmeans_log(toy, 101, 1), InvalidParameter);
    CHECK_NOTHROW(kmeans_log(toy, 100, 1));
}

TEST_CASE("k-means handles fewer distinct points than clusters", "[kmeans]") {
    const std::vector<double> x{1, 1, 1, 1, 2, 2};
    const ClusterModel m = kmeans(x, 6, 1, 4, 3);
    std::vector<int> sizes(4, 0);
    for (Label l : m.assignments) {
        ++sizes[l];
    }
    CHECK(std::all_of(sizes.begin(), sizes.end(), [](int s) { return s > 0; }));
    CHECK(m.inertia == 0.0);
}
