#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "countthin/distributions.hpp"
#include "countthin/errors.hpp"
#include "countthin/theory.hpp"

using namespace countthin;
using Catch::Approx;

TEST_CASE("moments at mu=25, b=8, eps=0.3", "[theory]") {
    const auto inf = thinning_moments(25.0, 8.0, kInfinity, 0.3);
    CHECK(inf.mean == Approx(7.5));
    CHECK(inf.covariance == Approx(16.40625).epsilon(1e-14));
    CHECK(inf.variance == Approx(14.53125).epsilon(1e-14));
    CHECK(inf.complement_variance == Approx(55.78125).epsilon(1e-14));
    CHECK(inf.correlation == Approx(0.57625).margin(5e-5));
    CHECK(inf.correlation == Approx(correlation_at_infinite_bprime(25.0, 8.0, 0.3)).epsilon(1e-13));

    const auto matched = thinning_moments(25.0, 8.0, 8.0, 0.3);
    CHECK(matched.covariance == 0.0);
    CHECK(matched.correlation == 0.0);
    CHECK(matched.variance == Approx(30.9375).epsilon(1e-14));
    CHECK(matched.complement_variance == Approx(0.7 * 103.125).epsilon(1e-14));

    const auto tiny = thinning_moments(25.0, 8.0, 0.01, 0.3);
    CHECK(tiny.covariance < 0.0);
    CHECK(tiny.correlation == Approx(-0.72035).margin(1e-5));
}

TEST_CASE("folds sum back to the total variance", "[theory]") {
    for (double bp : {0.01, 1.0, 8.0, 50.0, kInfinity}) {
        const auto m = thinning_moments(25.0, 8.0, bp, 0.3);
        CHECK(m.variance + m.complement_variance + 2.0 * m.covariance == Approx(103.125).epsilon(1e-13));
    }
}

TEST_CASE("correlation at infinite b' depends only on b / mu", "[theory]") {
    CHECK(correlation_at_infinite_bprime(10.0, 10.0, 0.5) == Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(correlation_at_infinite_bprime(3.0, 3.0, 0.5) == Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(correlation_at_infinite_bprime(5.0, kInfinity, 0.5) == 0.0);
    double prev = 1.0;
    for (double b = 0.01; b < 1e4; b *= 2.0) {
        const double r = correlation_at_infinite_bprime(1.0, b, 0.5);
        CHECK(r < prev);
        CHECK(r > 0.0);
        prev = r;
    }
    CHECK(correlation_at_infinite_bprime(1.0, 1e-8, 0.5) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("covariance sign follows b' relative to b", "[theory]") {
    CHECK(thinning_moments(4.0, 2.0, 1.0, 0.5).covariance < 0.0);
    CHECK(thinning_moments(4.0, 2.0, 3.0, 0.5).covariance > 0.0);
    const auto pois = thinning_moments(4.0, kInfinity, 1.0, 0.25);
    CHECK(pois.covariance == 0.0);
    CHECK(pois.variance == Approx(1.0));
}

TEST_CASE("fisher information", "[theory]") {
    CHECK(fisher_information_nb(25.0, 8.0) == Approx(8.0 / (33.0 * 25.0)).epsilon(1e-15));
    CHECK(fisher_information_nb(4.0, kInfinity) == Approx(0.25));
    CHECK(fold_information(25.0, 8.0, 0.3) == Approx(0.3 * 8.0 / 825.0).epsilon(1e-15));
    CHECK(fisher_information_nb(4.0, 1e12) == Approx(0.25).epsilon(1e-10));
}

TEST_CASE("theory input validation", "[theory]") {
    CHECK_THROWS_AS(thinning_moments(0.0, 1.0, 1.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(thinning_moments(1.0, 0.0, 1.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(thinning_moments(1.0, 1.0, 0.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(thinning_moments(1.0, 1.0, 1.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(correlation_at_infinite_bprime(1.0, 1.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(fold_information(1.0, 1.0, 1.5), InvalidParameter);
}
