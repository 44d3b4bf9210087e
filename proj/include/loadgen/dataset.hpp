#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loadgen::dataset {

using TimePoint = std::chrono::sys_seconds;

// Hourly load in MW: one row per hour, one column per area.
struct LoadDataset {
    std::string time_header = "timestamp";
    std::vector<TimePoint> timestamps;
    std::vector<std::string> areas;
    Eigen::MatrixXd values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index dims() const { return values.cols(); }
};

struct LoadResult {
    LoadDataset dataset;
    std::size_t dropped_rows = 0;
    std::vector<std::string> diagnostics;
};

/// Parses an hourly CSV whose first column is an ISO-8601 timestamp. Columns
/// named in `drop_columns` are removed first; rows with a missing value in any
/// remaining column are then deleted and counted.
LoadResult load_csv(const std::filesystem::path& path, std::span<const std::string> drop_columns = {});
LoadResult parse_csv(std::istream& in, std::span<const std::string> drop_columns = {},
                     std::string_view source = "<stream>");

void write_csv(std::ostream& out, const LoadDataset& ds);

TimePoint parse_timestamp(std::string_view text);
std::string format_timestamp(TimePoint t);

struct Split {
    LoadDataset train;
    LoadDataset test;
};

inline constexpr int kHoursPerWeek = 168;

/// Partitions the dataset into 168-hour blocks counted from the first
/// timestamp and assigns whole blocks to the test split in seeded random order
/// until the test share is as close to `test_fraction` as blocks allow. Rows
/// past the last complete week belong to the final block.
Split split_weekly_blocks(const LoadDataset& ds, double test_fraction, std::uint64_t seed);

/// Row subset preserving order.
LoadDataset select_rows(const LoadDataset& ds, std::span<const Eigen::Index> rows);

struct NormalizationSpec {
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    Eigen::Index dims() const { return min.size(); }
    bool degenerate(Eigen::Index dim) const { return !(max[dim] > min[dim]); }
    std::vector<Eigen::Index> degenerate_dims() const;
};

NormalizationSpec fit_minmax(const Eigen::MatrixXd& values);
NormalizationSpec fit_minmax(const LoadDataset& train);

// Maps v to (v - min) / (max - min); no clipping. Degenerate dimensions map to 0.
Eigen::MatrixXd normalize(const Eigen::MatrixXd& values, const NormalizationSpec& spec);
LoadDataset normalize(const LoadDataset& ds, const NormalizationSpec& spec);
// Inverse of normalize. Degenerate dimensions return the constant.
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const NormalizationSpec& spec);

nlohmann::json to_json(const NormalizationSpec& spec);
NormalizationSpec normalization_from_json(const nlohmann::json& j);

struct ConditionVector {
    double sin = 0.0;
    double cos = 1.0;
};

ConditionVector encode_hour(int hour);

inline constexpr Eigen::Index kConditionDims = 2;

/// n x 2 matrix of (sin, cos) rows.
Eigen::MatrixXd encode_hours(std::span<const int> hours);

/// Hour of day (UTC) for each row.
std::vector<int> hours_of_day(const LoadDataset& ds);

nlohmann::json summarize(const LoadDataset& ds);

} // namespace loadgen::dataset
