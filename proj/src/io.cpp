#include "countthin/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "countthin/errors.hpp"

namespace countthin {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) {
        out.push_back(trim(cur));
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::vector<std::string> whitespace_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) {
        out.push_back(t);
    }
    return out;
}

std::uint64_t parse_unsigned(const std::string& token, const char* what) {
    std::uint64_t v = 0;
    const char* first = token.data();
    const char* last = first + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || token.empty()) {
        throw InvalidInput(std::string(what) + ": expected a nonnegative integer, got '" + token + "'");
    }
    return v;
}

Count parse_count(const std::string& token, const char* what) {
    const std::uint64_t v = parse_unsigned(token, what);
    if (v > std::numeric_limits<Count>::max()) {
        throw InvalidInput(std::string(what) + ": count " + token + " exceeds the supported range");
    }
    return static_cast<Count>(v);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot open '" + path + "' for reading");
    }
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidInput("cannot open '" + path + "' for writing");
    }
    return out;
}

template <typename T>
void write_row(std::ostream& out, const T* values, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        if (i) {
            out << ',';
        }
        if constexpr (std::is_floating_point_v<T>) {
            out << format_double(values[i]);
        } else {
            out << values[i];
        }
    }
    out << '\n';
}

}  // namespace

MatrixFormat parse_matrix_format(const std::string& name) {
    const std::string n = lower(name);
    if (n == "auto") {
        return MatrixFormat::Auto;
    }
    if (n == "mtx") {
        return MatrixFormat::MatrixMarket;
    }
    if (n == "csv") {
        return MatrixFormat::Csv;
    }
    throw InvalidParameter("unknown matrix format '" + name + "' (expected auto, mtx or csv)");
}

MatrixFormat resolve_format(const std::string& path, MatrixFormat format) {
    if (format != MatrixFormat::Auto) {
        return format;
    }
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? std::string{} : lower(path.substr(dot + 1));
    if (ext == "mtx") {
        return MatrixFormat::MatrixMarket;
    }
    if (ext == "csv") {
        return MatrixFormat::Csv;
    }
    throw InvalidInput("cannot infer the matrix format of '" + path + "'; use .mtx, .csv or --format");
}

CountMatrix read_matrix_market(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidInput("matrix market: empty input");
    }
    const auto header = whitespace_tokens(lower(line));
    if (header.size() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix" || header[2] != "coordinate" ||
        header[3] != "integer" || header[4] != "general") {
        throw InvalidInput("matrix market: expected '%%MatrixMarket matrix coordinate integer general', got '" +
                           trim(line) + "'");
    }
    do {
        if (!std::getline(in, line)) {
            throw InvalidInput("matrix market: missing size line");
        }
        line = trim(line);
    } while (line.empty() || line[0] == '%');
    const auto size = whitespace_tokens(line);
    if (size.size() != 3) {
        throw InvalidInput("matrix market: size line must hold rows, cols and entries");
    }
    const std::size_t rows = parse_unsigned(size[0], "matrix market rows");
    const std::size_t cols = parse_unsigned(size[1], "matrix market cols");
    const std::size_t entries = parse_unsigned(size[2], "matrix market entries");

    std::vector<Triplet> triplets;
    triplets.reserve(entries);
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '%') {
            continue;
        }
        const auto tok = whitespace_tokens(t);
        if (tok.size() != 3) {
            throw InvalidInput("matrix market: malformed entry '" + t + "'");
        }
        const std::size_t r = parse_unsigned(tok[0], "matrix market row index");
        const std::size_t c = parse_unsigned(tok[1], "matrix market column index");
        if (r < 1 || r > rows || c < 1 || c > cols) {
            throw InvalidInput("matrix market: index (" + tok[0] + ", " + tok[1] + ") out of range");
        }
        triplets.push_back({r - 1, c - 1, parse_count(tok[2], "matrix market value")});
        ++seen;
    }
    if (seen != entries) {
        throw InvalidInput("matrix market: header announces " + std::to_string(entries) + " entries, found " +
                           std::to_string(seen));
    }
    return CountMatrix::sparse(rows, cols, std::move(triplets));
}

void write_matrix_market(std::ostream& out, const CountMatrix& m) {
    out << "%%MatrixMarket matrix coordinate integer general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << m.nonzeros() << '\n';
    m.for_each_nonzero([&](std::size_t i, std::size_t j, Count v) { out << i + 1 << ' ' << j + 1 << ' ' << v << '\n'; });
}

CountMatrix read_csv(std::istream& in) {
    std::vector<Count> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line, ',');
        if (rows == 0) {
            cols = fields.size();
        } else if (fields.size() != cols) {
            throw InvalidInput("csv: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(cols));
        }
        for (const auto& f : fields) {
            values.push_back(parse_count(f, "csv value"));
        }
        ++rows;
    }
    return CountMatrix::dense(rows, cols, std::move(values));
}

void write_csv(std::ostream& out, const CountMatrix& m) {
    const CountMatrix d = m.is_sparse() ? m.to_dense() : CountMatrix{};
    const auto v = m.is_sparse() ? d.dense_values() : m.dense_values();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        write_row(out, v.data() + i * m.cols(), m.cols());
    }
}

CountMatrix read_matrix(const std::string& path, MatrixFormat format) {
    const MatrixFormat f = resolve_format(path, format);
    std::ifstream in = open_in(path);
    try {
        return f == MatrixFormat::MatrixMarket ? read_matrix_market(in) : read_csv(in);
    } catch (const std::invalid_argument& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

void write_matrix(const std::string& path, const CountMatrix& m, MatrixFormat format) {
    const MatrixFormat f = resolve_format(path, format);
    std::ofstream out = open_out(path);
    if (f == MatrixFormat::MatrixMarket) {
        write_matrix_market(out, m);
    } else {
        write_csv(out, m);
    }
    if (!out) {
        throw InvalidInput("failed writing '" + path + "'");
    }
}

double parse_double(const std::string& token) {
    const std::string t = lower(trim(token));
    if (t == "inf" || t == "+inf" || t == "infinity" || t == "+infinity") {
        return std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    const char* first = t.data();
    const char* last = first + t.size();
    if (first != last && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || first == last) {
        throw InvalidInput("expected a number, got '" + token + "'");
    }
    return v;
}

std::string format_double(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string> gene_ids(const CountMatrix& m) {
    if (m.col_names.size() == m.cols()) {
        return m.col_names;
    }
    std::vector<std::string> ids(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        ids[j] = "gene_" + std::to_string(j + 1);
    }
    return ids;
}

DispersionTable read_dispersion(std::istream& in) {
    DispersionTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty() || line[0] == '#') {
            continue;
        }
        const auto fields = split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            throw InvalidInput("dispersion file line " + std::to_string(line_no) +
                               ": expected 'gene_id<TAB>b_hat'");
        }
        double b = 0.0;
        try {
            b = parse_double(fields[1]);
        } catch (const InvalidInput&) {
            throw InvalidInput("dispersion file line " + std::to_string(line_no) + ": bad value '" + fields[1] + "'");
        }
        if (!(b > 0.0)) {
            throw InvalidInput("dispersion file line " + std::to_string(line_no) + ": b must be positive");
        }
        t.gene_ids.push_back(fields[0]);
        t.b.push_back(b);
    }
    return t;
}

void write_dispersion(std::ostream& out, const DispersionTable& table) {
    if (table.gene_ids.size() != table.b.size()) {
        throw InvalidInput("dispersion table: ids and values differ in length");
    }
    for (std::size_t j = 0; j < table.b.size(); ++j) {
        out << table.gene_ids[j] << '\t' << format_double(table.b[j]) << '\n';
    }
}

DispersionTable read_dispersion_file(const std::string& path) {
    std::ifstream in = open_in(path);
    try {
        return read_dispersion(in);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

void write_dispersion_file(const std::string& path, const DispersionTable& table) {
    std::ofstream out = open_out(path);
    write_dispersion(out, table);
}

void write_truth(std::ostream& out, const SimTruth& truth, std::uint64_t seed) {
    out << "n = " << truth.n << '\n';
    out << "p = " << truth.p << '\n';
    out << "k_star = " << truth.k_star << '\n';
    out << "beta_star = " << format_double(truth.beta_star) << '\n';
    out << "tau = " << format_double(truth.tau) << '\n';
    out << "seed = " << seed << '\n';
    out << "\n[b]\n";
    write_row(out, truth.b.data(), truth.b.size());
    out << "\n[gamma]\n";
    write_row(out, truth.gamma.data(), truth.gamma.size());
    out << "\n[true_labels]\n";
    write_row(out, truth.true_labels.data(), truth.true_labels.size());
    out << "\n[de_genes]\n";
    write_row(out, truth.de_genes.data(), truth.de_genes.size());
    out << "\n[beta]\n";
    for (std::size_t j = 0; j < truth.p; ++j) {
        write_row(out, truth.beta.data() + j * truth.k_star, truth.k_star);
    }
    out << "\n[lambda]\n";
    for (std::size_t i = 0; i < truth.n; ++i) {
        write_row(out, truth.lambda.data() + i * truth.p, truth.p);
    }
}

SimTruth read_truth(std::istream& in, std::uint64_t* seed) {
    std::map<std::string, std::string> keys;
    std::map<std::string, std::vector<std::vector<std::string>>> sections;
    std::string line;
    std::string current;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        if (t.front() == '[' && t.back() == ']') {
            current = t.substr(1, t.size() - 2);
            sections[current];
            continue;
        }
        if (current.empty()) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) {
                throw InvalidInput("truth: expected 'key = value', got '" + t + "'");
            }
            keys[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
        } else {
            sections[current].push_back(split(t, ','));
        }
    }
    auto key = [&](const std::string& k) -> const std::string& {
        const auto it = keys.find(k);
        if (it == keys.end()) {
            throw InvalidInput("truth: missing key '" + k + "'");
        }
        return it->second;
    };
    auto flat = [&](const std::string& name, std::size_t rows, std::size_t cols) {
        const auto it = sections.find(name);
        if (it == sections.end()) {
            throw InvalidInput("truth: missing section [" + name + "]");
        }
        std::vector<double> out;
        out.reserve(rows * cols);
        for (const auto& row : it->second) {
            if (row.size() != cols) {
                throw InvalidInput("truth: section [" + name + "] has a row of the wrong length");
            }
            for (const auto& f : row) {
                out.push_back(parse_double(f));
            }
        }
        if (out.size() != rows * cols) {
            throw InvalidInput("truth: section [" + name + "] has the wrong number of rows");
        }
        return out;
    };

    SimTruth t;
    t.n = parse_unsigned(key("n"), "truth n");
    t.p = parse_unsigned(key("p"), "truth p");
    t.k_star = parse_unsigned(key("k_star"), "truth k_star");
    t.beta_star = parse_double(key("beta_star"));
    t.tau = parse_double(key("tau"));
    if (seed) {
        *seed = parse_unsigned(key("seed"), "truth seed");
    }
    t.b = flat("b", 1, t.p);
    t.gamma = flat("gamma", 1, t.n);
    for (double v : flat("true_labels", 1, t.n)) {
        t.true_labels.push_back(static_cast<std::uint32_t>(v));
    }
    const auto de = sections.find("de_genes");
    if (de != sections.end()) {
        for (const auto& row : de->second) {
            for (const auto& f : row) {
                if (!f.empty()) {
                    t.de_genes.push_back(parse_unsigned(f, "truth de gene"));
                }
            }
        }
    }
    t.beta = flat("beta", t.p, t.k_star);
    t.lambda = flat("lambda", t.n, t.p);
    return t;
}

CountMatrix filter_genes(const CountMatrix& m, std::size_t min_cells, std::vector<std::size_t>& kept) {
    std::vector<std::size_t> nonzero(m.cols(), 0);
    m.for_each_nonzero([&](std::size_t, std::size_t j, Count) { ++nonzero[j]; });
    kept.clear();
    for (std::size_t j = 0; j < m.cols(); ++j) {
        if (nonzero[j] >= min_cells) {
            kept.push_back(j);
        }
    }
    CountMatrix out = m.select_cols(kept);
    if (m.col_names.size() == m.cols()) {
        out.col_names.clear();
        for (std::size_t j : kept) {
            out.col_names.push_back(m.col_names[j]);
        }
    }
    return out;
}

}  // namespace countthin
