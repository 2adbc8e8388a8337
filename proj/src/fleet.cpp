#include "scsf/fleet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include "scsf/baseline.hpp"
#include "scsf/error.hpp"
#include "scsf/parallel.hpp"

namespace scsf {

namespace {

constexpr double kTukeyFactor = 1.5;
constexpr int kMinTukeyValues = 4;

double median_of_sorted(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  const std::size_t len = end - begin;
  const std::size_t mid = begin + len / 2;
  return len % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// Rejection reasons share the fit's vocabulary where one applies.
std::string reason_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::SpanTooShort: return std::string(to_string(RejectReason::TooShort));
    default: return std::string(to_string(e.code()));
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::NoParseableRows, "external table line " + std::to_string(line_no) + ": bad number '" + text + "'");
}

}  // namespace

SiteInput site_from_matrix(std::string site_id, PowerMatrix p) {
  return {std::move(site_id), [p = std::move(p)] { return p; }};
}

TukeyResult tukey_outliers(const std::vector<double>& values) {
  if (static_cast<int>(values.size()) < kMinTukeyValues) {
    throw Error(ErrorCode::TooFewValues, "Tukey fences need at least 4 values, got " + std::to_string(values.size()));
  }
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t half = n / 2;  // lower half excludes the median when n is odd
  TukeyResult out;
  out.interval.q1 = median_of_sorted(v, 0, half);
  out.interval.q3 = median_of_sorted(v, n - half, n);
  const double iqr = out.interval.q3 - out.interval.q1;
  out.interval.lo = out.interval.q1 - kTukeyFactor * iqr;
  out.interval.hi = out.interval.q3 + kTukeyFactor * iqr;
  out.outliers.reserve(n);
  for (double x : values) out.outliers.push_back(x < out.interval.lo || x > out.interval.hi);
  return out;
}

FleetSummary summarize(const std::vector<SiteRecord>& records, std::vector<bool>* outlier) {
  FleetSummary s;
  s.total = static_cast<int>(records.size());
  std::vector<double> betas;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].accepted) continue;
    betas.push_back(records[i].beta_percent);
    where.push_back(i);
    if (records[i].beta_percent > 0.0) ++s.positive;
  }
  s.included = static_cast<int>(betas.size());
  s.rejected = s.total - s.included;
  if (outlier) outlier->assign(records.size(), false);
  if (betas.empty()) throw Error(ErrorCode::NothingAccepted, "no site produced an accepted fit");

  std::vector<double> sorted = betas;
  std::sort(sorted.begin(), sorted.end());
  s.median = median_of_sorted(sorted, 0, sorted.size());

  std::vector<bool> flag(betas.size(), false);
  if (static_cast<int>(betas.size()) >= kMinTukeyValues) {
    const auto t = tukey_outliers(betas);
    s.interval = t.interval;
    flag = t.outliers;
  }
  double sum = 0.0;
  int kept = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (flag[i]) {
      ++s.outliers;
      if (outlier) (*outlier)[where[i]] = true;
      continue;
    }
    sum += betas[i];
    ++kept;
  }
  s.mean = sum / kept;
  double ss = 0.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!flag[i]) ss += (betas[i] - s.mean) * (betas[i] - s.mean);
  }
  s.std = kept > 1 ? std::sqrt(ss / (kept - 1)) : 0.0;
  return s;
}

FleetResult run_fleet(const std::vector<SiteInput>& sites, const HyperParams& hp, int workers) {
  if (sites.empty()) throw Error(ErrorCode::NoSites, "fleet has no sites");
  hp.validate();
  FleetResult out;
  out.records.resize(sites.size());
  parallel_for(sites.size(), workers, [&](std::size_t i) {
    auto& rec = out.records[i];
    rec.site_id = sites[i].site_id;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto a = analyze_site(sites[i].load(), hp);
      rec.accepted = a.report.accepted;
      rec.reason = a.report.status;
      rec.beta_percent = a.report.beta_percent;
      rec.iterations = a.report.iterations;
      rec.clear_days = a.report.clear_days;
      rec.residual_slope = a.report.residual_slope;
    } catch (const Error& e) {
      rec.reason = reason_for(e);
    } catch (const std::exception& e) {
      rec.reason = e.what();
    }
    rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const SiteRecord& a, const SiteRecord& b) { return a.site_id < b.site_id; });
  try {
    out.summary = summarize(out.records, &out.outlier);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NothingAccepted) throw;
    out.summary.total = static_cast<int>(out.records.size());
    out.summary.rejected = out.summary.total;
  }
  return out;
}

std::vector<ExternalEstimate> parse_external_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> column;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    for (std::size_t i = 0; i < cells.size(); ++i) column[cells[i]] = i;
    break;
  }
  for (const char* name : {"site_id", "rate", "lo", "hi"}) {
    if (!column.count(name)) {
      throw Error(ErrorCode::AmbiguousSchema, std::string("external table lacks column '") + name + "'");
    }
  }
  std::vector<ExternalEstimate> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](const char* name) -> const std::string& {
      const auto idx = column.at(name);
      if (idx >= cells.size()) {
        throw Error(ErrorCode::NoParseableRows, "external table line " + std::to_string(line_no) + " is short");
      }
      return cells[idx];
    };
    ExternalEstimate e;
    e.site_id = cell("site_id");
    e.rate = parse_number(cell("rate"), line_no);
    e.lo = parse_number(cell("lo"), line_no);
    e.hi = parse_number(cell("hi"), line_no);
    out.push_back(std::move(e));
  }
  return out;
}

Comparison compare_external(const FleetResult& result, const std::vector<ExternalEstimate>& external) {
  std::map<std::string, const ExternalEstimate*> by_id;
  for (const auto& e : external) by_id.emplace(e.site_id, &e);
  Comparison c;
  int within = 0;
  for (const auto& r : result.records) {
    if (!r.accepted) continue;
    const auto it = by_id.find(r.site_id);
    if (it == by_id.end()) continue;
    const auto& e = *it->second;
    ComparisonRow row{r.site_id, r.beta_percent, e.rate, e.lo, e.hi, r.beta_percent - e.rate,
                      r.beta_percent >= e.lo && r.beta_percent <= e.hi};
    within += row.within;
    const bool s_neg = row.scsf < 0.0;
    const bool e_neg = row.external < 0.0;
    if (s_neg && e_neg) ++c.quadrants.both_negative;
    else if (!s_neg && !e_neg) ++c.quadrants.both_nonnegative;
    else if (s_neg) ++c.quadrants.scsf_negative_external_nonnegative;
    else ++c.quadrants.scsf_nonnegative_external_negative;
    c.rows.push_back(std::move(row));
  }
  if (c.rows.empty()) throw Error(ErrorCode::EmptyJoin, "no accepted site appears in the external table");
  c.within_fraction = static_cast<double>(within) / static_cast<double>(c.rows.size());
  return c;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, double width) {
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "histogram bin width must be positive");
  std::vector<HistogramBin> bins;
  if (values.empty()) return bins;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const auto first = static_cast<long long>(std::floor(*mn / width));
  const auto last = static_cast<long long>(std::floor(*mx / width));
  for (long long b = first; b <= last; ++b) {
    bins.push_back({static_cast<double>(b) * width, static_cast<double>(b + 1) * width, 0});
  }
  for (double v : values) ++bins[static_cast<std::size_t>(static_cast<long long>(std::floor(v / width)) - first)].count;
  return bins;
}

}  // namespace scsf
