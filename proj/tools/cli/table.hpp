#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "countthin/errors.hpp"
#include "countthin/io.hpp"

namespace countthin::cli {

// Tab-separated table with a fixed header.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    template <typename... Ts>
    void add(const Ts&... cells) {
        std::vector<std::string> row;
        row.reserve(sizeof...(cells));
        (row.push_back(cell(cells)), ...);
        rows_.push_back(std::move(row));
    }

    void append(const Table& other) { rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end()); }

    std::size_t size() const noexcept { return rows_.size(); }

    void write(std::ostream& out) const {
        write_line(out, header_);
        for (const auto& r : rows_) {
            write_line(out, r);
        }
    }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidInput("cannot open '" + path + "' for writing");
        }
        write(out);
    }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    template <typename T>
    static std::string cell(const T& v) requires std::is_integral_v<T> {
        return std::to_string(v);
    }

    static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "\t" : "") << cells[i];
        }
        out << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace countthin::cli
