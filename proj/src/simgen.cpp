#include "countthin/simgen.hpp"

#include <cmath>
#include <random>
#include <string>

#include "countthin/distributions.hpp"
#include "countthin/errors.hpp"
#include "countthin/rng.hpp"

namespace countthin {

std::vector<double> SimTruth::latent() const {
    std::vector<double> l(n * k_star, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        l[i * k_star] = 1.0;
        if (true_labels[i] > 0) {
            l[i * k_star + true_labels[i]] = 1.0;
        }
    }
    return l;
}

std::size_t de_block_size(std::size_t p) noexcept {
    return (5 * p + 99) / 100;
}

SimDataset generate_dataset(std::size_t n, std::size_t p, std::size_t k_star, double beta_star, double tau,
                            std::uint64_t seed) {
    if (n == 0 || p == 0 || k_star == 0) {
        throw InvalidParameter("generate_dataset: n, p and k_star must be positive");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw InvalidParameter("generate_dataset: tau must be positive and finite");
    }
    if (!std::isfinite(beta_star)) {
        throw InvalidParameter("generate_dataset: beta_star must be finite");
    }
    const std::size_t block = de_block_size(p);
    if ((k_star - 1) * block > p) {
        throw InvalidParameter("generate_dataset: " + std::to_string(k_star - 1) + " blocks of " +
                               std::to_string(block) + " genes do not fit in p = " + std::to_string(p));
    }

    SimTruth t;
    t.n = n;
    t.p = p;
    t.k_star = k_star;
    t.beta_star = beta_star;
    t.tau = tau;

    t.beta.assign(p * k_star, 0.0);
    {
        RngStream rng(derive_seed(seed, "beta0"), 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t j = 0; j < p; ++j) {
            t.beta[j * k_star] = normal(rng);
        }
    }
    for (std::size_t k = 1; k < k_star; ++k) {
        for (std::size_t j = (k - 1) * block; j < k * block; ++j) {
            t.beta[j * k_star + k] = beta_star;
            t.de_genes.push_back(j);
        }
    }

    t.true_labels.resize(n);
    {
        RngStream rng(derive_seed(seed, "labels"), 0);
        for (auto& label : t.true_labels) {
            label = static_cast<std::uint32_t>(rng.uniform() * static_cast<double>(k_star));
        }
    }

    t.lambda.resize(n * p);
    t.b.assign(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = t.true_labels[i];
        for (std::size_t j = 0; j < p; ++j) {
            double eta = t.beta[j * k_star];
            if (c > 0) {
                eta += t.beta[j * k_star + c];
            }
            t.lambda[i * p + j] = std::exp(eta);
            t.b[j] += t.lambda[i * p + j];
        }
    }
    for (double& bj : t.b) {
        bj = bj / static_cast<double>(n) / tau;
    }
    t.gamma.assign(n, 1.0);

    const std::uint64_t count_seed = derive_seed(seed, "counts");
    std::vector<Count> values(n * p);
    const auto total = static_cast<std::int64_t>(values.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < total; ++e) {
        const auto entry = static_cast<std::size_t>(e);
        RngStream rng(count_seed, entry);
        values[entry] = sample_nb({t.lambda[entry], t.b[entry % p]}, rng);
    }

    return SimDataset{CountMatrix::dense(n, p, std::move(values)), std::move(t)};
}

CountMatrix generate_toy(std::uint64_t seed) {
    constexpr std::size_t rows = 100;
    constexpr std::size_t cols = 2;
    const std::uint64_t s = derive_seed(seed, "toy");
    std::vector<Count> values(rows * cols);
    for (std::size_t e = 0; e < values.size(); ++e) {
        RngStream rng(s, e);
        values[e] = sample_nb({5.0, 5.0}, rng);
    }
    return CountMatrix::dense(rows, cols, std::move(values));
}

}  // namespace countthin
