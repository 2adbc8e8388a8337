#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace scsf {

using Date = std::chrono::year_month_day;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kSecondsPerDay = 86400;
inline constexpr int kDefaultIntervalSeconds = 300;
inline constexpr int kMinFitDays = 730;

// One reading. `local_seconds` counts seconds from 1970-01-01T00:00 on the
// civil clock the timestamp was written in; `utc_offset_minutes` is set only
// when the timestamp carried an explicit offset ("Z", "+02:00", ...).
struct PowerRecord {
  std::int64_t local_seconds = 0;
  std::optional<int> utc_offset_minutes;
  std::optional<double> power;

  bool negative() const { return power && *power < 0.0; }
};

struct RawSeries {
  std::vector<PowerRecord> records;
  std::string site_id;
  std::size_t dropped_rows = 0;

  std::size_t negative_count() const;
};

// Column selection for CSV input. Empty names trigger auto-detection.
struct CsvSchema {
  std::string timestamp_column;
  std::string power_column;
  char delimiter = ',';
};

struct RegularSeries {
  Date start_date{};
  int interval = kDefaultIntervalSeconds;
  std::vector<std::optional<double>> values;
  int timezone_offset = 0;  // minutes east of UTC, fixed for the whole series

  int samples_per_day() const { return kSecondsPerDay / interval; }
  std::size_t day_count() const;
};

// Time-of-day x day embedding. Masked-out entries hold 0.
struct PowerMatrix {
  Eigen::MatrixXd data;
  BoolMatrix mask;
  double delta_t = 1.0;  // hours per sample
  std::vector<Date> day_index;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
  double observed_fraction() const;
};

struct ScrubConfig {
  double min_day_coverage = 0.6;   // fraction of daytime samples that must be observed
  double stuck_hours = 2.0;        // constant runs longer than this are masked
  double daytime_level = 0.01;     // daytime rows: 98th pct >= level * robust scale
};

struct ScrubReport {
  std::size_t negative_entries = 0;
  std::size_t stuck_entries = 0;
  std::size_t low_coverage_days = 0;

  bool empty() const {
    return negative_entries == 0 && stuck_entries == 0 && low_coverage_days == 0;
  }
};

// Parses "YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH[:]MM]".
std::optional<PowerRecord> parse_timestamp(std::string_view text);
std::int64_t to_local_seconds(Date date, int seconds_of_day = 0);
Date date_of(std::int64_t local_seconds);
std::string format_timestamp(std::int64_t local_seconds);

RawSeries parse_power_csv(std::istream& source, const CsvSchema& schema = {});
RawSeries load_power_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

RegularSeries regularize(const RawSeries& raw, int interval = kDefaultIntervalSeconds,
                         int offset_minutes = 0);

// Inverse of regularize on the grid: one record per slot, missing preserved.
RawSeries to_raw(const RegularSeries& series, std::string site_id = {});

PowerMatrix embed_matrix(const RegularSeries& series, std::size_t min_days = kMinFitDays);

// 95th percentile of per-day maxima over observed entries; 0 if nothing observed.
double robust_scale(const PowerMatrix& matrix);

// Rows whose observed 98th percentile reaches `level` times the robust scale.
std::vector<bool> daytime_rows(const PowerMatrix& matrix, double level = 0.01);

struct ScrubResult {
  PowerMatrix matrix;
  ScrubReport report;
};

ScrubResult scrub(PowerMatrix matrix, const ScrubConfig& rules = {});

// Linear-interpolated percentile of an unsorted sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace scsf
