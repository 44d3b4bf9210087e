#include "loadgen/dataset.hpp"

#include "loadgen/error.hpp"
#include "loadgen/io.hpp"
#include "loadgen/random.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace loadgen::dataset {

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole)
{
    if (pos + len > text.size()) {
        throw InputError("unparseable timestamp '" + std::string(whole) + "'");
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
        throw InputError("unparseable timestamp '" + std::string(whole) + "'");
    }
    return value;
}

void expect(std::string_view text, std::size_t pos, std::string_view allowed, std::string_view whole)
{
    if (pos >= text.size() || allowed.find(text[pos]) == std::string_view::npos) {
        throw InputError("unparseable timestamp '" + std::string(whole) + "'");
    }
}

} // namespace

TimePoint parse_timestamp(std::string_view text)
{
    using namespace std::chrono;
    // YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH[:]MM]
    const auto whole = text;
    const int y = parse_int(text, 0, 4, whole);
    expect(text, 4, "-", whole);
    const int mo = parse_int(text, 5, 2, whole);
    expect(text, 7, "-", whole);
    const int d = parse_int(text, 8, 2, whole);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw InputError("invalid calendar date in '" + std::string(whole) + "'");
    }
    seconds tod{0};
    std::size_t pos = 10;
    if (pos < text.size()) {
        expect(text, pos, "T ", whole);
        const int hh = parse_int(text, pos + 1, 2, whole);
        expect(text, pos + 3, ":", whole);
        const int mm = parse_int(text, pos + 4, 2, whole);
        int ss = 0;
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            ss = parse_int(text, pos + 1, 2, whole);
            pos += 3;
            if (pos < text.size() && text[pos] == '.') {
                ++pos;
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                    ++pos;
                }
            }
        }
        if (hh > 23 || mm > 59 || ss > 60) {
            throw InputError("invalid time of day in '" + std::string(whole) + "'");
        }
        tod = hours{hh} + minutes{mm} + seconds{ss};
        if (pos < text.size()) {
            if (text[pos] == 'Z') {
                ++pos;
            } else {
                expect(text, pos, "+-", whole);
                const int sign = text[pos] == '-' ? -1 : 1;
                const int oh = parse_int(text, pos + 1, 2, whole);
                std::size_t mpos = pos + 3;
                if (mpos < text.size() && text[mpos] == ':') {
                    ++mpos;
                }
                const int om = parse_int(text, mpos, 2, whole);
                tod -= sign * (hours{oh} + minutes{om});
                pos = mpos + 2;
            }
        }
        if (pos != text.size()) {
            throw InputError("trailing characters in timestamp '" + std::string(whole) + "'");
        }
    }
    return sys_days{ymd} + tod;
}

std::string format_timestamp(TimePoint t)
{
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buffer;
}

LoadResult parse_csv(std::istream& in, std::span<const std::string> drop_columns, std::string_view source)
{
    const io::Table table = io::read_table(in, source);

    std::vector<Eigen::Index> keep;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (std::find(drop_columns.begin(), drop_columns.end(), table.columns[c]) == drop_columns.end()) {
            keep.push_back(static_cast<Eigen::Index>(c));
        }
    }
    if (keep.empty()) {
        throw InputError(std::string(source) + ": no columns left after dropping");
    }

    LoadResult result;
    LoadDataset& ds = result.dataset;
    ds.time_header = table.label_header;
    for (auto c : keep) {
        ds.areas.push_back(table.columns[static_cast<std::size_t>(c)]);
    }

    std::vector<Eigen::Index> complete;
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        bool ok = true;
        for (auto c : keep) {
            if (!std::isfinite(table.values(r, c))) {
                ok = false;
                break;
            }
        }
        if (ok) {
            complete.push_back(r);
        }
    }
    result.dropped_rows = static_cast<std::size_t>(table.values.rows()) - complete.size();
    if (result.dropped_rows > 0) {
        result.diagnostics.push_back("dropped " + std::to_string(result.dropped_rows) +
                                     " row(s) with missing values");
    }

    ds.values.resize(static_cast<Eigen::Index>(complete.size()), static_cast<Eigen::Index>(keep.size()));
    ds.timestamps.reserve(complete.size());
    for (std::size_t i = 0; i < complete.size(); ++i) {
        const auto r = complete[i];
        for (std::size_t k = 0; k < keep.size(); ++k) {
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.values(r, keep[k]);
        }
        ds.timestamps.push_back(parse_timestamp(table.labels[static_cast<std::size_t>(r)]));
        if (i > 0 && ds.timestamps[i] <= ds.timestamps[i - 1]) {
            throw InputError(std::string(source) + ": timestamps not strictly increasing at '" +
                             table.labels[static_cast<std::size_t>(r)] + "'");
        }
    }
    return result;
}

LoadResult load_csv(const std::filesystem::path& path, std::span<const std::string> drop_columns)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    return parse_csv(in, drop_columns, path.string());
}

void write_csv(std::ostream& out, const LoadDataset& ds)
{
    io::Table table;
    table.label_header = ds.time_header;
    table.columns = ds.areas;
    table.values = ds.values;
    table.labels.reserve(ds.timestamps.size());
    for (auto t : ds.timestamps) {
        table.labels.push_back(format_timestamp(t));
    }
    io::write_table(out, table);
}

LoadDataset select_rows(const LoadDataset& ds, std::span<const Eigen::Index> rows)
{
    LoadDataset out;
    out.time_header = ds.time_header;
    out.areas = ds.areas;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), ds.dims());
    out.timestamps.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<Eigen::Index>(i)) = ds.values.row(rows[i]);
        out.timestamps.push_back(ds.timestamps[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

Split split_weekly_blocks(const LoadDataset& ds, double test_fraction, std::uint64_t seed)
{
    using namespace std::chrono;
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    }
    if (ds.rows() == 0) {
        throw InputError("cannot split an empty dataset");
    }
    const auto t0 = ds.timestamps.front();
    const auto span_hours = duration_cast<hours>(ds.timestamps.back() - t0).count() + 1;
    const auto full_blocks = span_hours / kHoursPerWeek;
    if (full_blocks < 2) {
        throw InputError("dataset spans fewer than two full weeks");
    }

    std::vector<Eigen::Index> block_of(static_cast<std::size_t>(ds.rows()));
    std::vector<Eigen::Index> block_size(static_cast<std::size_t>(full_blocks), 0);
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
        const auto h = duration_cast<hours>(ds.timestamps[static_cast<std::size_t>(r)] - t0).count();
        const auto b = std::min<Eigen::Index>(h / kHoursPerWeek, full_blocks - 1);
        block_of[static_cast<std::size_t>(r)] = b;
        ++block_size[static_cast<std::size_t>(b)];
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(full_blocks));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const double target = test_fraction * static_cast<double>(ds.rows());
    std::vector<bool> in_test(static_cast<std::size_t>(full_blocks), false);
    std::vector<Eigen::Index> taken;
    Eigen::Index test_rows = 0;
    for (auto b : order) {
        const auto size = block_size[static_cast<std::size_t>(b)];
        if (size == 0) {
            continue;
        }
        if (std::abs(static_cast<double>(test_rows + size) - target) < std::abs(static_cast<double>(test_rows) - target)) {
            in_test[static_cast<std::size_t>(b)] = true;
            taken.push_back(b);
            test_rows += size;
        }
    }
    if (taken.empty()) {
        for (auto b : order) {
            if (block_size[static_cast<std::size_t>(b)] > 0) {
                in_test[static_cast<std::size_t>(b)] = true;
                test_rows += block_size[static_cast<std::size_t>(b)];
                break;
            }
        }
    } else if (test_rows == ds.rows()) {
        in_test[static_cast<std::size_t>(taken.back())] = false;
    }

    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows_idx;
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
        (in_test[static_cast<std::size_t>(block_of[static_cast<std::size_t>(r)])] ? test_rows_idx : train_rows)
            .push_back(r);
    }
    if (train_rows.empty() || test_rows_idx.empty()) {
        throw InputError("weekly split left one side empty");
    }
    return {select_rows(ds, train_rows), select_rows(ds, test_rows_idx)};
}

std::vector<Eigen::Index> NormalizationSpec::degenerate_dims() const
{
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < dims(); ++j) {
        if (degenerate(j)) {
            out.push_back(j);
        }
    }
    return out;
}

NormalizationSpec fit_minmax(const Eigen::MatrixXd& values)
{
    if (values.rows() < 2) {
        throw InputError("min-max fit needs at least two rows");
    }
    return {values.colwise().minCoeff().transpose(), values.colwise().maxCoeff().transpose()};
}

NormalizationSpec fit_minmax(const LoadDataset& train)
{
    return fit_minmax(train.values);
}

namespace {

void check_dims(const Eigen::MatrixXd& values, const NormalizationSpec& spec)
{
    if (values.cols() != spec.dims()) {
        throw InputError("dimension mismatch: data has " + std::to_string(values.cols()) +
                         " columns, normalization has " + std::to_string(spec.dims()));
    }
}

} // namespace

Eigen::MatrixXd normalize(const Eigen::MatrixXd& values, const NormalizationSpec& spec)
{
    check_dims(values, spec);
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (spec.degenerate(j)) {
            out.col(j).setZero();
        } else {
            out.col(j) = (values.col(j).array() - spec.min[j]) / (spec.max[j] - spec.min[j]);
        }
    }
    return out;
}

LoadDataset normalize(const LoadDataset& ds, const NormalizationSpec& spec)
{
    LoadDataset out = ds;
    out.values = normalize(ds.values, spec);
    return out;
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const NormalizationSpec& spec)
{
    check_dims(values, spec);
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (spec.degenerate(j)) {
            out.col(j).setConstant(spec.min[j]);
        } else {
            out.col(j) = values.col(j).array() * (spec.max[j] - spec.min[j]) + spec.min[j];
        }
    }
    return out;
}

nlohmann::json to_json(const NormalizationSpec& spec)
{
    nlohmann::json j;
    j["min"] = std::vector<double>(spec.min.data(), spec.min.data() + spec.min.size());
    j["max"] = std::vector<double>(spec.max.data(), spec.max.data() + spec.max.size());
    return j;
}

NormalizationSpec normalization_from_json(const nlohmann::json& j)
{
    const auto lo = j.at("min").get<std::vector<double>>();
    const auto hi = j.at("max").get<std::vector<double>>();
    if (lo.size() != hi.size()) {
        throw InputError("normalization min/max length mismatch");
    }
    NormalizationSpec spec;
    spec.min = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    spec.max = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    for (Eigen::Index i = 0; i < spec.dims(); ++i) {
        if (spec.max[i] < spec.min[i]) {
            throw InputError("normalization max below min");
        }
    }
    return spec;
}

ConditionVector encode_hour(int hour)
{
    if (hour < 0 || hour > 23) {
        throw std::out_of_range("hour must be in [0, 23], got " + std::to_string(hour));
    }
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(hour) / 24.0;
    return {std::sin(angle), std::cos(angle)};
}

Eigen::MatrixXd encode_hours(std::span<const int> hours)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(hours.size()), kConditionDims);
    for (std::size_t i = 0; i < hours.size(); ++i) {
        const auto c = encode_hour(hours[i]);
        out(static_cast<Eigen::Index>(i), 0) = c.sin;
        out(static_cast<Eigen::Index>(i), 1) = c.cos;
    }
    return out;
}

std::vector<int> hours_of_day(const LoadDataset& ds)
{
    using namespace std::chrono;
    std::vector<int> out;
    out.reserve(ds.timestamps.size());
    for (auto t : ds.timestamps) {
        out.push_back(static_cast<int>(duration_cast<hours>(t - floor<days>(t)).count()));
    }
    return out;
}

nlohmann::json summarize(const LoadDataset& ds)
{
    nlohmann::json j;
    j["rows"] = ds.rows();
    j["dims"] = ds.dims();
    if (!ds.timestamps.empty()) {
        j["first"] = format_timestamp(ds.timestamps.front());
        j["last"] = format_timestamp(ds.timestamps.back());
    }
    auto& per_area = j["areas"] = nlohmann::json::array();
    for (Eigen::Index c = 0; c < ds.dims(); ++c) {
        nlohmann::json a;
        a["name"] = ds.areas[static_cast<std::size_t>(c)];
        if (ds.rows() > 0) {
            a["min"] = ds.values.col(c).minCoeff();
            a["max"] = ds.values.col(c).maxCoeff();
            a["mean"] = ds.values.col(c).mean();
        }
        per_area.push_back(std::move(a));
    }
    return j;
}

} // namespace loadgen::dataset
