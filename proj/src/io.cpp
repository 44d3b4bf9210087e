#include "loadgen/io.hpp"

#include "loadgen/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace loadgen::io {

std::string format_number(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw NumericError("cannot format number");
    }
    return {buffer, end};
}

std::vector<std::string> split(std::string_view text, char delimiter)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(delimiter, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            break;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string trim(std::string_view text)
{
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = text.find_last_not_of(" \t\r\n");
    auto out = text.substr(first, last - first + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
        out = out.substr(1, out.size() - 2);
    }
    return std::string(out);
}

namespace {

double parse_cell(const std::string& cell, std::string_view source, std::size_t line)
{
    if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        std::ostringstream msg;
        msg << source << ":" << line << ": non-numeric value '" << cell << "'";
        throw InputError(msg.str());
    }
    return value;
}

} // namespace

Table read_table(std::istream& in, std::string_view source)
{
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<std::vector<double>> rows;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty() || line.front() == '#') {
            continue;
        }
        auto cells = split(line, ',');
        if (!have_header) {
            if (cells.size() < 2) {
                throw InputError(std::string(source) + ": header needs a label column and at least one value column");
            }
            table.label_header = trim(cells.front());
            for (std::size_t i = 1; i < cells.size(); ++i) {
                table.columns.push_back(trim(cells[i]));
            }
            have_header = true;
            continue;
        }
        if (cells.size() != table.columns.size() + 1) {
            std::ostringstream msg;
            msg << source << ":" << line_no << ": expected " << table.columns.size() + 1 << " fields, got "
                << cells.size();
            throw InputError(msg.str());
        }
        table.labels.push_back(trim(cells.front()));
        std::vector<double> row(table.columns.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            row[i] = parse_cell(trim(cells[i + 1]), source, line_no);
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) {
        throw InputError(std::string(source) + ": empty file");
    }

    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return table;
}

Table read_table(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    return read_table(in, path.string());
}

void write_table(std::ostream& out, const Table& table)
{
    out << table.label_header;
    for (const auto& column : table.columns) {
        out << ',' << column;
    }
    out << '\n';
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        out << (static_cast<std::size_t>(r) < table.labels.size() ? table.labels[static_cast<std::size_t>(r)] : "");
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            out << ',';
            if (!std::isnan(table.values(r, c))) {
                out << format_number(table.values(r, c));
            }
        }
        out << '\n';
    }
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace loadgen::io
