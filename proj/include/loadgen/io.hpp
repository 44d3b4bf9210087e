#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace loadgen::io {

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

// A parsed CSV: first column kept as text, remaining columns numeric.
// Empty cells are stored as NaN.
struct Table {
    std::string label_header;
    std::vector<std::string> columns;
    std::vector<std::string> labels;
    Eigen::MatrixXd values;
};

// Lines starting with '#' are comments. Throws InputError on malformed input.
Table read_table(std::istream& in, std::string_view source = "<stream>");
Table read_table(const std::filesystem::path& path);

void write_table(std::ostream& out, const Table& table);

std::vector<std::string> split(std::string_view text, char delimiter);
std::string trim(std::string_view text);

std::string read_file(const std::filesystem::path& path);

} // namespace loadgen::io
