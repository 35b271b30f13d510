#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "countthin/io.hpp"
#include "countthin/matrix.hpp"
#include "table.hpp"

namespace countthin::cli {

/// Where each replication's data come from: an input file, the toy design, or the latent-cluster simulation.
struct DataSource {
    std::string input;
    MatrixFormat format = MatrixFormat::Auto;
    std::size_t min_cells = 0;
    bool toy = false;
    std::size_t n = 200;
    std::size_t p = 100;
    std::size_t k_star = 1;
    double beta_star = 1.5;
    double tau = 1.0;
    std::size_t reps = 1;
};

/// One replication's data plus whatever truth is known about it.
struct Replicate {
    CountMatrix counts;
    std::vector<std::string> gene_ids;
    std::vector<double> known_b;        // empty when unknown
    std::vector<std::uint8_t> is_de;    // empty when unknown
    std::size_t k_star = 0;             // 0 when unknown
    std::vector<std::size_t> kept;      // original column of each gene after filtering
    std::size_t original_p = 0;
};

/**
 * Source of the thinning overdispersion b': `auto` (truth when simulated,
 * estimated otherwise), `known`, `estimate`, `inf`, `file:<path>` or a
 * positive number.
 */
struct DispersionSource {
    enum class Kind { Auto, Known, Estimate, Infinite, File, Value };
    Kind kind = Kind::Auto;
    std::string path;
    double value = 0.0;

    static DispersionSource parse(const std::string& text);
    std::string describe() const;
};

/// Loads the input once (if any); replications then reuse it.
class DataProvider {
public:
    explicit DataProvider(DataSource source);
    Replicate get(std::size_t rep, std::uint64_t seed) const;
    const DataSource& source() const noexcept { return source_; }
    bool from_file() const noexcept { return !source_.input.empty(); }

private:
    DataSource source_;
    std::optional<Replicate> fixed_;
};

/// Per-gene b' for one replicate. A dispersion file may list either all genes or only the kept ones.
std::vector<double> resolve_b_prime(const DispersionSource& src, const Replicate& data);

/// Child seed of replication `rep`.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t rep);

struct SelectKConfig {
    DataSource data;
    std::vector<std::string> methods{"naive", "nbcs", "pcs"};
    double eps = 0.5;
    std::size_t k_max = 10;
    std::string dispersion = "auto";
    std::uint64_t seed = 1;
};

struct NbcvConfig {
    DataSource data;
    std::vector<std::string> methods{"nbcv", "pcv"};
    std::size_t folds = 10;
    std::size_t k_max = 10;
    std::string dispersion = "auto";
    std::uint64_t seed = 1;
};

struct DeConfig {
    DataSource data;
    std::vector<std::string> methods{"naive", "nbcs", "pcs"};
    double eps = 0.5;
    std::string dispersion = "auto";
    std::uint64_t seed = 1;
};

struct CvConfig {
    DataSource data;
    std::vector<std::string> methods{"naive", "split"};
    std::size_t k = 5;
    std::size_t n_folds = 5;
    std::string dispersion = "auto";
    std::uint64_t seed = 1;
};

struct ResultTables {
    Table detail;
    Table summary;
};

/// Columns: rep, method, k, mse, mse_scaled, selected, k_selected. Summary: method, k, reps, mean_mse, mean_mse_scaled, selection_rate.
ResultTables run_select_k(const SelectKConfig& config);

/// Same schema as run_select_k.
ResultTables run_nbcv(const NbcvConfig& config);

/// Columns: rep, method, gene, de_gene, p_value, warning. Summary: method, n_tests, frac_below_0.05, ks_statistic, ks_p_value.
ResultTables run_de(const DeConfig& config);

/// Detail: rep, method, row, col, count (columns in display order). Summary: rep, method, diagonal_fraction, ari, missing_label.
ResultTables run_cv(const CvConfig& config);

}  // namespace countthin::cli
