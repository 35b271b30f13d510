#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "countthin/errors.hpp"
#include "countthin/evaluation.hpp"
#include "countthin/simgen.hpp"
#include "support/stats_oracles.hpp"

using namespace countthin;

namespace {

CountMatrix two_blocks(std::size_t n) {
    std::vector<Count> v;
    for (std::size_t i = 0; i < n; ++i) {
        const bool a = i % 2 == 0;
        v.push_back(a ? 20 : 0);
        v.push_back(a ? 0 : 20);
        v.push_back(3);
    }
    return CountMatrix::dense(n, 3, std::move(v));
}

}  // namespace

TEST_CASE("held-out error is zero for a perfect prediction", "[select_k]") {
    const CountMatrix x = two_blocks(20);
    SelectOptions opt;
    opt.k_max = 4;
    const KSelectionResult r = select_k(x, x, 0.5, 1, opt);
    CHECK(r.mse_by_k[0] > 0.0);
    CHECK(r.mse_by_k[1] == 0.0);
    CHECK(r.k_selected == 2);

    // Test counts three times the train counts match eps = 0.25.
    std::vector<Count> tripled;
    for (Count c : x.dense_values()) {
        tripled.push_back(3 * c);
    }
    const KSelectionResult scaled = select_k(x, CountMatrix::dense(20, 3, std::move(tripled)), 0.25, 1, opt);
    CHECK(scaled.mse_by_k[1] == Catch::Approx(0.0).margin(1e-28));
}

TEST_CASE("held-out error ignores label names and row order", "[select_k]") {
    const SimDataset d = generate_dataset(60, 10, 2, 2.0, 1.0, 3);
    const ClusterModel m = kmeans_log(d.counts, 3, 1);
    const double base = heldout_mse(d.counts, d.counts, m.assignments, 3, 1.0);
    std::vector<Label> renamed(m.assignments);
    for (Label& l : renamed) {
        l = (l + 1) % 3;
    }
    CHECK(heldout_mse(d.counts, d.counts, renamed, 3, 1.0) == Catch::Approx(base).epsilon(1e-12));

    // Reverse the rows of both matrices together with their labels.
    std::vector<Count> rev;
    std::vector<Label> rev_labels;
    const auto vals = d.counts.dense_values();
    for (std::size_t i = 60; i-- > 0;) {
        rev.insert(rev.end(), vals.begin() + static_cast<std::ptrdiff_t>(i * 10),
                   vals.begin() + static_cast<std::ptrdiff_t>(i * 10 + 10));
        rev_labels.push_back(m.assignments[i]);
    }
    const CountMatrix r = CountMatrix::dense(60, 10, std::move(rev));
    CHECK(heldout_mse(r, r, rev_labels, 3, 1.0) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("select_k validates its input and is deterministic", "[select_k]") {
    const CountMatrix toy = generate_toy(1);
    CHECK_THROWS_AS(select_k(toy, toy.slice_rows(0, 50), 0.5, 1), InvalidInput);
    CHECK_THROWS_AS(select_k(toy, toy, 1.0, 1), InvalidParameter);
    const auto a = select_k(toy, toy, 0.5, 9);
    const auto b = select_k(toy, toy, 0.5, 9);
    CHECK(a.mse_by_k == b.mse_by_k);
    CHECK(argmin_k(std::vector<double>{3.0, 1.0, 1.0, 2.0}) == 2);
}

TEST_CASE("naive mode error falls with K on null data", "[select_k][statistical]") {
    std::vector<double> avg(10, 0.0);
    for (std::uint64_t s = 0; s < 100; ++s) {
        const CountMatrix toy = generate_toy(1000 + s);
        const auto r = select_k(toy, toy, 0.5, s);
        for (std::size_t k = 0; k < 10; ++k) {
            avg[k] += r.mse_by_k[k] / 100.0;
        }
    }
    for (std::size_t k = 1; k < 10; ++k) {
        CHECK(avg[k] <= avg[k - 1]);
    }
}

TEST_CASE("two-fold cross-validation sums two symmetric passes", "[nbcv]") {
    const SimDataset d = generate_dataset(80, 20, 2, 2.0, 1.0, 5);
    const FoldSet fs = nb_count_split(d.counts, ThinPlan::equal(2, d.truth.b), 77);
    SelectOptions opt;
    opt.k_max = 4;
    const KSelectionResult cv = nbcv_select_k(fs, 8, opt);
    const KSelectionResult a = select_k(fs[1], fs[0], 0.5, derive_seed(8, std::uint64_t{0}), opt);
    const KSelectionResult b = select_k(fs[0], fs[1], 0.5, derive_seed(8, std::uint64_t{1}), opt);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(cv.mse_by_k[k] == Catch::Approx(a.mse_by_k[k] + b.mse_by_k[k]).epsilon(1e-14));
    }
    CHECK(cv.eps_used == 0.5);
    CHECK_THROWS_AS(nbcv_select_k(d.counts, 1, {1.0}, 1), InvalidParameter);
}

TEST_CASE("cross-validation picks one cluster on null data", "[nbcv][statistical]") {
    int hits = 0;
    SelectOptions opt;
    opt.k_max = 5;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const SimDataset d = generate_dataset(100, 20, 1, 0.0, 1.0, 2000 + s);
        hits += nbcv_select_k(d.counts, 5, d.truth.b, s, opt).k_selected == 1;
    }
    INFO("K = 1 selected in " << hits << " of 100 runs");
    CHECK(hits >= 80);
}

TEST_CASE("differential expression on the toy null", "[de][statistical]") {
    std::vector<double> split_p, naive_p;
    for (std::uint64_t s = 0; s < 500; ++s) {
        const CountMatrix toy = generate_toy(3000 + s);
        const FoldSet fs = nb_count_split(toy, ThinPlan{{0.5, 0.5}, {5.0}}, s);
        const DeResult split = de_test(fs[0], fs[1], s);
        const DeResult naive = de_test(toy, toy, s);
        split_p.insert(split_p.end(), split.p_values.begin(), split.p_values.end());
        naive_p.insert(naive_p.end(), naive.p_values.begin(), naive.p_values.end());
    }
    const KsResult ks = ks_uniform(split_p);
    INFO("split KS D = " << ks.statistic << " p = " << ks.p_value);
    CHECK(ks.p_value > 0.01);
    const double naive_small =
        static_cast<double>(std::count_if(naive_p.begin(), naive_p.end(), [](double p) { return p < 0.05; })) /
        static_cast<double>(naive_p.size());
    INFO("naive fraction below 0.05: " << naive_small);
    CHECK(naive_small > 0.2);
}

TEST_CASE("DE with a degenerate clustering is conservative", "[de]") {
    const CountMatrix toy = generate_toy(4);
    std::vector<Label> labels(100, 0);
    labels[0] = 1;
    const DeResult r = de_test_with_labels(toy, labels);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(r.p_values[j] == 1.0);
        CHECK(r.warning[j] == 1);
    }
    CHECK_THROWS_AS(de_test(toy.slice_rows(0, 3), toy.slice_rows(0, 3), 1), InvalidInput);
}

TEST_CASE("intradataset cross-validation on the toy data", "[cv]") {
    double diag = 0.0, ari_naive = 0.0, ari_split = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const CountMatrix toy = generate_toy(4000 + s);
        const ConfusionResult naive = intradataset_cv_naive(toy, 5, 5, s);
        const ConfusionResult split = intradataset_cv_split(toy, 5, {5.0}, s);
        diag += naive.diagonal_fraction() / 20.0;
        ari_naive += naive.ari / 20.0;
        ari_split += split.ari / 20.0;
        CHECK(split.ari == Catch::Approx(adjusted_rand_index(split.labels_a, split.labels_b)));
        std::size_t total = 0;
        for (std::size_t v : naive.matrix) {
            total += v;
        }
        CHECK(total == 100);
    }
    INFO("naive diagonal " << diag << ", naive ARI " << ari_naive << ", split ARI " << ari_split);
    CHECK(diag >= 0.85);
    CHECK(ari_naive >= 0.7);
    CHECK(ari_split <= 0.15);
}

TEST_CASE("cross-validation recovers separated clusters", "[cv]") {
    const SimDataset d = generate_dataset(150, 40, 3, 3.0, 1.0, 6);
    const ConfusionResult naive = intradataset_cv_naive(d.counts, 3, 5, 1);
    CHECK(naive.ari > 0.95);
    CHECK_FALSE(naive.missing_label);
    double mean_ari = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const SimDataset e = generate_dataset(200, 100, 3, 3.0, 1.0, 60 + s);
        mean_ari += intradataset_cv_split(e.counts, 3, e.truth.b, s).ari / 20.0;
    }
    INFO("split ARI " << mean_ari);
    CHECK(mean_ari >= 0.9);
}

TEST_CASE("shuffled labels give chance-level agreement", "[cv]") {
    RngStream r(7, 0);
    std::vector<Label> a(2000), b(2000);
    for (std::size_t i = 0; i < 2000; ++i) {
        a[i] = static_cast<Label>(r.uniform() * 4);
        b[i] = static_cast<Label>(r.uniform() * 4);
    }
    const ConfusionResult c = make_confusion(a, b, 4, 4);
    CHECK(std::abs(c.ari) < 0.02);
    // Display permutation does not change the reported ARI.
    std::vector<Label> permuted(b);
    for (Label& l : permuted) {
        l = static_cast<Label>(c.permutation[l]);
    }
    CHECK(adjusted_rand_index(a, permuted) == Catch::Approx(c.ari));
}

TEST_CASE("sample-splitting baseline", "[sample_split]") {
    const CountMatrix toy = generate_toy(8);
    CHECK_THROWS_AS(sample_split_select_k(toy.slice_rows(0, 6), 1), InvalidInput);
    CHECK_THROWS_AS(sample_split_de(toy.slice_rows(0, 9), 1), InvalidInput);

    // Identical halves with separated clusters transfer labels exactly.
    const CountMatrix blocks = two_blocks(20);
    std::vector<Label> truth(20);
    for (std::size_t i = 0; i < 20; ++i) {
        truth[i] = i % 2;
    }
    const auto moved = transfer_labels_knn(blocks, truth, blocks);
    CHECK(adjusted_rand_index(moved, truth) == 1.0);

    std::vector<double> avg(10, 0.0);
    std::vector<double> ps;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const CountMatrix x = generate_toy(5000 + s);
        const auto r = sample_split_select_k(x, s);
        for (std::size_t k = 0; k < 10; ++k) {
            avg[k] += r.mse_by_k[k] / 100.0;
        }
        const DeResult de = sample_split_de(x, s);
        ps.insert(ps.end(), de.p_values.begin(), de.p_values.end());
    }
    CHECK(avg[9] < avg[0]);
    int decreasing = 0;
    for (std::size_t k = 1; k < 10; ++k) {
        decreasing += avg[k] <= avg[k - 1];
    }
    CHECK(decreasing >= 8);
    const double small = static_cast<double>(std::count_if(ps.begin(), ps.end(), [](double p) { return p < 0.05; })) /
                         static_cast<double>(ps.size());
    INFO("sample-split fraction below 0.05: " << small);
    CHECK(small > 0.1);
}

TEST_CASE("KS test against uniform", "[ks]") {
    std::vector<double> grid;
    for (int i = 0; i < 1000; ++i) {
        grid.push_back((i + 0.5) / 1000.0);
    }
    const KsResult g = ks_uniform(grid);
    CHECK(g.statistic == Catch::Approx(0.0005));
    CHECK(g.p_value == Catch::Approx(1.0));

    std::vector<double> skewed;
    for (double v : grid) {
        skewed.push_back(v * v);
    }
    CHECK(ks_uniform(skewed).p_value < 1e-10);

    std::vector<double> rnd;
    RngStream r(9, 0);
    for (int i = 0; i < 5000; ++i) {
        rnd.push_back(r.uniform());
    }
    const KsResult a = ks_uniform(rnd);
    const auto oracle = countthin::testing::ks_uniform(rnd);
    CHECK(a.statistic == Catch::Approx(oracle.d));
    CHECK(a.p_value == Catch::Approx(oracle.p_value).margin(0.02));
    CHECK(a.p_value > 0.01);
    CHECK_THROWS_AS(ks_uniform(std::vector<double>{}), InvalidInput);
}
