#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "countthin/matrix.hpp"
#include "countthin/simgen.hpp"

namespace countthin {

enum class MatrixFormat { Auto, MatrixMarket, Csv };

/// Parses "auto", "mtx" or "csv". Throws InvalidParameter otherwise.
MatrixFormat parse_matrix_format(const std::string& name);

/// Resolves Auto from the file extension (.mtx or .csv). Throws InvalidInput for anything else.
MatrixFormat resolve_format(const std::string& path, MatrixFormat format);

/**
 * Matrix Market `coordinate integer general` with 1-based indices.
 * Reads into sparse layout; duplicate coordinates and negative or
 * out-of-range values are InvalidInput. Explicit zeros are dropped.
 */
CountMatrix read_matrix_market(std::istream& in);
void write_matrix_market(std::ostream& out, const CountMatrix& m);

/// Dense headerless CSV of nonnegative integers, one row per line.
CountMatrix read_csv(std::istream& in);
void write_csv(std::ostream& out, const CountMatrix& m);

/// File wrappers. Throw InvalidInput when the file cannot be opened or parsed.
CountMatrix read_matrix(const std::string& path, MatrixFormat format = MatrixFormat::Auto);
void write_matrix(const std::string& path, const CountMatrix& m, MatrixFormat format = MatrixFormat::Auto);

/// Gene identifier column plus b values; +inf is written and read as `inf`.
struct DispersionTable {
    std::vector<std::string> gene_ids;
    std::vector<double> b;
};

DispersionTable read_dispersion(std::istream& in);
void write_dispersion(std::ostream& out, const DispersionTable& table);
DispersionTable read_dispersion_file(const std::string& path);
void write_dispersion_file(const std::string& path, const DispersionTable& table);

/// Default gene identifiers: the column names if present, otherwise gene_1..gene_p.
std::vector<std::string> gene_ids(const CountMatrix& m);

/**
 * Simulation truth as `key = value` lines followed by `[name]` sections
 * holding comma-separated rows. Doubles are written with 17 significant
 * digits, so a read returns the exact values.
 */
void write_truth(std::ostream& out, const SimTruth& truth, std::uint64_t seed);
SimTruth read_truth(std::istream& in, std::uint64_t* seed = nullptr);

/// Parses a double, accepting `inf`, `+inf` and `infinity` (any case). Throws InvalidInput.
double parse_double(const std::string& token);

/// Shortest text that reads back to the same double; `inf` for +infinity.
std::string format_double(double v);

/// Drops genes with nonzero counts in fewer than `min_cells` cells; `kept` receives the original indices.
CountMatrix filter_genes(const CountMatrix& m, std::size_t min_cells, std::vector<std::size_t>& kept);

}  // namespace countthin
