#include "scsf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include "scsf/error.hpp"

namespace scsf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

bool is_missing_token(std::string_view s) {
  auto l = lower(s);
  return l.empty() || l == "nan" || l == "null";
}

bool looks_like_timestamp_name(const std::string& name) {
  auto l = lower(name);
  return l.find("time") != std::string::npos || l.find("date") != std::string::npos ||
         l == "t" || l == "ts";
}

bool looks_like_power_name(const std::string& name) {
  auto l = lower(name);
  return l.find("power") != std::string::npos || l.find("kw") != std::string::npos || l == "p";
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::AmbiguousSchema, "column '" + name + "' not present in header");
}

struct ResolvedColumns {
  std::size_t timestamp;
  std::size_t power;
};

ResolvedColumns resolve_schema(const std::vector<std::string>& header, const CsvSchema& schema) {
  ResolvedColumns cols{0, 0};
  if (!schema.timestamp_column.empty()) {
    cols.timestamp = find_column(header, schema.timestamp_column);
  } else {
    auto it = std::find_if(header.begin(), header.end(), looks_like_timestamp_name);
    cols.timestamp = it == header.end() ? 0 : static_cast<std::size_t>(it - header.begin());
  }
  if (!schema.power_column.empty()) {
    cols.power = find_column(header, schema.power_column);
    return cols;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != cols.timestamp) candidates.push_back(i);
  }
  if (candidates.size() > 1) {
    std::vector<std::size_t> named;
    for (auto i : candidates) {
      if (looks_like_power_name(header[i])) named.push_back(i);
    }
    if (named.size() != 1) {
      throw Error(ErrorCode::AmbiguousSchema,
                  "cannot choose a power column among " + std::to_string(candidates.size()) +
                      " candidates; set the power column name explicitly");
    }
    candidates = named;
  }
  if (candidates.empty()) throw Error(ErrorCode::AmbiguousSchema, "no power column");
  cols.power = candidates.front();
  return cols;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  auto q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::size_t RawSeries::negative_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const PowerRecord& r) { return r.negative(); }));
}

std::size_t RegularSeries::day_count() const {
  return values.size() / static_cast<std::size_t>(samples_per_day());
}

double PowerMatrix::observed_fraction() const {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

std::int64_t to_local_seconds(Date date, int seconds_of_day) {
  auto days = std::chrono::sys_days{date}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kSecondsPerDay + seconds_of_day;
}

Date date_of(std::int64_t local_seconds) {
  auto days = floor_div(local_seconds, kSecondsPerDay);
  return Date{std::chrono::sys_days{std::chrono::days{days}}};
}

std::string format_timestamp(std::int64_t local_seconds) {
  auto date = date_of(local_seconds);
  auto sod = local_seconds - to_local_seconds(date);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60),
                static_cast<int>(sod % 60));
  return buf;
}

std::optional<PowerRecord> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, mo = 0, d = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
            std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;

  PowerRecord rec;
  int seconds = 0;
  auto rest = text.substr(10);
  if (!rest.empty()) {
    if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
    rest.remove_prefix(1);
    int hh = 0, mm = 0, ss = 0;
    if (rest.size() < 5 || rest[2] != ':' || !parse_int(rest.substr(0, 2), hh) ||
        !parse_int(rest.substr(3, 2), mm)) {
      return std::nullopt;
    }
    rest.remove_prefix(5);
    if (!rest.empty() && rest.front() == ':') {
      if (rest.size() < 3 || !parse_int(rest.substr(1, 2), ss)) return std::nullopt;
      rest.remove_prefix(3);
      if (!rest.empty() && rest.front() == '.') {
        rest.remove_prefix(1);
        while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) {
          rest.remove_prefix(1);
        }
      }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    seconds = hh * 3600 + mm * 60 + ss;
    if (!rest.empty()) {
      if (rest == "Z") {
        rec.utc_offset_minutes = 0;
      } else if (rest.front() == '+' || rest.front() == '-') {
        int sign = rest.front() == '-' ? -1 : 1;
        rest.remove_prefix(1);
        int oh = 0, om = 0;
        if (rest.size() == 5 && rest[2] == ':') {
          if (!parse_int(rest.substr(0, 2), oh) || !parse_int(rest.substr(3, 2), om)) return std::nullopt;
        } else if (rest.size() == 4) {
          if (!parse_int(rest.substr(0, 2), oh) || !parse_int(rest.substr(2, 2), om)) return std::nullopt;
        } else if (rest.size() == 2) {
          if (!parse_int(rest, oh)) return std::nullopt;
        } else {
          return std::nullopt;
        }
        rec.utc_offset_minutes = sign * (oh * 60 + om);
      } else {
        return std::nullopt;
      }
    }
  }
  rec.local_seconds = to_local_seconds(date, seconds);
  return rec;
}

RawSeries parse_power_csv(std::istream& source, const CsvSchema& schema) {
  if (!source) throw Error(ErrorCode::UnreadableSource, "input stream is not readable");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(source, line)) {
    if (!trim(line).empty()) {
      for (auto f : split(line, schema.delimiter)) header.emplace_back(f);
      break;
    }
  }
  if (source.bad()) throw Error(ErrorCode::UnreadableSource, "read error");
  if (header.empty()) throw Error(ErrorCode::NoParseableRows, "empty input");
  auto cols = resolve_schema(header, schema);

  RawSeries raw;
  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    auto fields = split(line, schema.delimiter);
    if (fields.size() <= std::max(cols.timestamp, cols.power)) {
      ++raw.dropped_rows;
      continue;
    }
    auto rec = parse_timestamp(fields[cols.timestamp]);
    if (!rec) {
      ++raw.dropped_rows;
      continue;
    }
    auto token = fields[cols.power];
    if (!is_missing_token(token)) {
      double value = 0.0;
      if (!parse_double(token, value)) {
        ++raw.dropped_rows;
        continue;
      }
      rec->power = value;
    }
    raw.records.push_back(*rec);
  }
  if (source.bad()) throw Error(ErrorCode::UnreadableSource, "read error");
  if (raw.records.empty()) throw Error(ErrorCode::NoParseableRows, "no parseable rows");

  auto utc_key = [](const PowerRecord& r) {
    return r.local_seconds - 60LL * r.utc_offset_minutes.value_or(0);
  };
  std::stable_sort(raw.records.begin(), raw.records.end(),
                   [&](const PowerRecord& a, const PowerRecord& b) { return utc_key(a) < utc_key(b); });
  auto last = std::unique(raw.records.begin(), raw.records.end(),
                          [&](const PowerRecord& a, const PowerRecord& b) { return utc_key(a) == utc_key(b); });
  raw.dropped_rows += static_cast<std::size_t>(raw.records.end() - last);
  raw.records.erase(last, raw.records.end());
  return raw;
}

RawSeries load_power_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open " + path.string());
  auto raw = parse_power_csv(in, schema);
  raw.site_id = path.stem().string();
  return raw;
}

RegularSeries regularize(const RawSeries& raw, int interval, int offset_minutes) {
  if (interval <= 0 || kSecondsPerDay % interval != 0) {
    throw Error(ErrorCode::IntervalInvalid, "interval must divide 86400 seconds");
  }
  if (raw.records.empty()) throw Error(ErrorCode::SpanTooShort, "empty series");

  std::vector<std::int64_t> times;
  times.reserve(raw.records.size());
  for (const auto& r : raw.records) {
    auto t = r.local_seconds;
    if (r.utc_offset_minutes) t += 60LL * (offset_minutes - *r.utc_offset_minutes);
    times.push_back(t);
  }
  auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  auto first_day = floor_div(*lo, kSecondsPerDay);
  auto last_day = floor_div(*hi, kSecondsPerDay);
  auto days = last_day - first_day + 1;
  if (*hi - *lo < kSecondsPerDay - interval) {
    throw Error(ErrorCode::SpanTooShort, "series spans less than one day");
  }

  const auto per_day = kSecondsPerDay / interval;
  const auto bins = static_cast<std::size_t>(days * per_day);
  std::vector<double> sum(bins, 0.0);
  std::vector<int> count(bins, 0);
  const auto origin = first_day * kSecondsPerDay;
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    if (!raw.records[i].power) continue;
    auto bin = static_cast<std::size_t>((times[i] - origin) / interval);
    sum[bin] += *raw.records[i].power;
    ++count[bin];
  }

  RegularSeries out;
  out.start_date = date_of(origin);
  out.interval = interval;
  out.timezone_offset = offset_minutes;
  out.values.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] > 0) out.values[b] = sum[b] / count[b];
  }
  return out;
}

RawSeries to_raw(const RegularSeries& series, std::string site_id) {
  RawSeries raw;
  raw.site_id = std::move(site_id);
  raw.records.reserve(series.values.size());
  auto t = to_local_seconds(series.start_date);
  for (const auto& v : series.values) {
    raw.records.push_back(PowerRecord{t, std::nullopt, v});
    t += series.interval;
  }
  return raw;
}

PowerMatrix embed_matrix(const RegularSeries& series, std::size_t min_days) {
  const auto m = static_cast<Eigen::Index>(series.samples_per_day());
  const auto n = static_cast<Eigen::Index>(series.day_count());
  if (static_cast<std::size_t>(n) < min_days) {
    throw Error(ErrorCode::SpanTooShort, "series covers " + std::to_string(n) + " days, need " +
                                             std::to_string(min_days));
  }
  PowerMatrix pm;
  pm.data = Eigen::MatrixXd::Zero(m, n);
  pm.mask = BoolMatrix::Constant(m, n, false);
  pm.delta_t = series.interval / 3600.0;
  pm.day_index.reserve(static_cast<std::size_t>(n));
  auto day0 = std::chrono::sys_days{series.start_date};
  for (Eigen::Index j = 0; j < n; ++j) {
    pm.day_index.emplace_back(day0 + std::chrono::days{j});
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& v = series.values[static_cast<std::size_t>(j * m + i)];
      if (v && *v >= 0.0) {
        pm.data(i, j) = *v;
        pm.mask(i, j) = true;
      }
    }
  }
  return pm;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, values.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double robust_scale(const PowerMatrix& matrix) {
  std::vector<double> maxima;
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    double mx = -1.0;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
      if (matrix.mask(i, j)) mx = std::max(mx, matrix.data(i, j));
    }
    if (mx >= 0.0) maxima.push_back(mx);
  }
  if (maxima.empty()) return 0.0;
  return percentile(std::move(maxima), 95.0);
}

std::vector<bool> daytime_rows(const PowerMatrix& matrix, double level) {
  const double threshold = level * robust_scale(matrix);
  std::vector<bool> day(static_cast<std::size_t>(matrix.rows()), false);
  std::vector<double> row;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (matrix.mask(i, j)) row.push_back(matrix.data(i, j));
    }
    day[static_cast<std::size_t>(i)] = !row.empty() && threshold > 0.0 && percentile(row, 98.0) >= threshold;
  }
  return day;
}

ScrubResult scrub(PowerMatrix matrix, const ScrubConfig& rules) {
  ScrubReport report;
  const auto m = matrix.rows();
  const auto n = matrix.cols();

  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (matrix.mask(i, j) && matrix.data(i, j) < 0.0) {
        matrix.mask(i, j) = false;
        matrix.data(i, j) = 0.0;
        ++report.negative_entries;
      }
    }
  }

  const auto day = daytime_rows(matrix, rules.daytime_level);
  const auto max_run = rules.stuck_hours / matrix.delta_t;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index i = 0;
    while (i < m) {
      if (!matrix.mask(i, j) || !day[static_cast<std::size_t>(i)] || matrix.data(i, j) <= 0.0) {
        ++i;
        continue;
      }
      const double v = matrix.data(i, j);
      const double tol = 1e-9 * std::max(1.0, std::abs(v));
      Eigen::Index end = i + 1;
      while (end < m && matrix.mask(end, j) && std::abs(matrix.data(end, j) - v) <= tol) ++end;
      if (static_cast<double>(end - i) > max_run) {
        for (auto r = i; r < end; ++r) {
          matrix.mask(r, j) = false;
          matrix.data(r, j) = 0.0;
        }
        report.stuck_entries += static_cast<std::size_t>(end - i);
      }
      i = end;
    }
  }

  const auto day_count = std::count(day.begin(), day.end(), true);
  if (day_count > 0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index observed = 0;
      bool any = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (day[static_cast<std::size_t>(i)] && matrix.mask(i, j)) ++observed;
        any = any || matrix.mask(i, j);
      }
      if (!any) continue;
      if (static_cast<double>(observed) < rules.min_day_coverage * static_cast<double>(day_count)) {
        matrix.mask.col(j).setConstant(false);
        matrix.data.col(j).setZero();
        ++report.low_coverage_days;
      }
    }
  }
  return {std::move(matrix), report};
}

}  // namespace scsf
