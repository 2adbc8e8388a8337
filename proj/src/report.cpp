#include "scsf/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace scsf {

namespace {

using Eigen::Index;
using nlohmann::json;

std::string date_text(const PowerMatrix& p, Index day) {
  if (day >= static_cast<Index>(p.day_index.size())) return {};
  const auto& d = p.day_index[static_cast<std::size_t>(day)];
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

// Shortest text that round-trips closely enough for reports.
std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

const char* flag(bool b) { return b ? "true" : "false"; }

json hyperparams_json(const HyperParams& hp) {
  return {{"k", hp.k},
          {"tau", hp.tau},
          {"mu_left", hp.mu_left},
          {"mu_right", hp.mu_right},
          {"mu_year", hp.mu_year},
          {"max_iters", hp.max_iters},
          {"beta_tol", hp.beta_tol},
          {"subproblem_tol", hp.subproblem_tol},
          {"degradation", hp.fit_degradation}};
}

json tukey_json(const std::optional<TukeyInterval>& t) {
  if (!t) return nullptr;
  return {{"q1", t->q1}, {"q3", t->q3}, {"lo", t->lo}, {"hi", t->hi}};
}

// Five-stop ramp from dark purple through teal to yellow.
std::string ramp(double x) {
  static constexpr std::array<std::array<double, 3>, 5> stops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  x = std::clamp(x, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(x));
  const double f = x - static_cast<double>(i);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_clear_sky_csv(std::ostream& out, const PowerMatrix& p, const Eigen::MatrixXd& clear_sky) {
  out << "time";
  for (Index j = 0; j < clear_sky.cols(); ++j) out << ',' << date_text(p, j);
  out << '\n';
  const double minutes_per_row = 1440.0 / static_cast<double>(std::max<Index>(1, clear_sky.rows()));
  char buf[16];
  for (Index t = 0; t < clear_sky.rows(); ++t) {
    const auto minute = static_cast<int>(std::lround(static_cast<double>(t) * minutes_per_row));
    std::snprintf(buf, sizeof(buf), "%02d:%02d", minute / 60, minute % 60);
    out << buf;
    for (Index j = 0; j < clear_sky.cols(); ++j) out << ',' << num(clear_sky(t, j));
    out << '\n';
  }
}

void write_daily_energy_csv(std::ostream& out, const PowerMatrix& p, const SiteAnalysis& a) {
  out << header::kDailyEnergy << '\n';
  const auto& clear = a.fit.daily_energy.kwh;
  for (Index j = 0; j < p.cols(); ++j) {
    double measured = 0.0;
    for (Index t = 0; t < p.rows(); ++t) {
      if (p.mask(t, j)) measured += p.data(t, j) * p.delta_t;
    }
    out << j << ',' << date_text(p, j) << ',' << num(measured) << ','
        << (j < clear.size() ? num(clear(j)) : std::string()) << ',' << num(a.clear.score(j)) << ','
        << flag(a.clear.flags[static_cast<std::size_t>(j)]) << '\n';
  }
}

void write_residuals_csv(std::ostream& out, const PowerMatrix& p, const SiteAnalysis& a) {
  out << header::kResiduals << '\n';
  if (!a.diagnostics) return;
  const auto& d = *a.diagnostics;
  for (std::size_t i = 0; i < d.days.size(); ++i) {
    const auto j = d.days[i];
    const auto r = static_cast<Index>(i);
    out << j << ',' << date_text(p, j) << ',' << num(d.measured(r)) << ',' << num(d.clear_sky(r)) << ','
        << num(d.residuals(r)) << ',' << num(d.intercept + d.slope * static_cast<double>(j)) << '\n';
  }
}

json fit_json(const std::string& site_id, const PowerMatrix& p, const SiteAnalysis& a, const HyperParams& hp,
              const ScrubReport& scrub) {
  const auto& f = a.fit;
  json j;
  j["site_id"] = site_id;
  j["status"] = a.report.status;
  j["accepted"] = a.report.accepted;
  j["converged"] = f.converged;
  j["reject_detail"] = f.reject_detail;
  j["beta"] = f.beta;
  j["beta_percent"] = a.report.beta_percent;
  j["rate_text"] = a.report.rate_text;
  j["iterations"] = f.iterations;
  j["objective"] = f.objective_trace.empty() ? json(nullptr) : json(f.objective_trace.back().objective);
  j["clear_days"] = a.report.clear_days;
  j["residual_slope_kwh_per_day"] = a.report.residual_slope ? json(*a.report.residual_slope) : json(nullptr);
  j["residual_slope_half_width"] = a.report.residual_half_width ? json(*a.report.residual_half_width) : json(nullptr);
  j["samples_per_day"] = p.rows();
  j["days"] = p.cols();
  j["start_date"] = date_text(p, 0);
  j["delta_t_hours"] = p.delta_t;
  j["hyperparameters"] = hyperparams_json(hp);
  j["scrub"] = {{"negative_entries", scrub.negative_entries},
                {"stuck_entries", scrub.stuck_entries},
                {"low_coverage_days", scrub.low_coverage_days}};
  j["warnings"] = f.warnings;
  json trace = json::array();
  for (const auto& t : f.objective_trace) trace.push_back({{"iteration", t.iteration}, {"objective", t.objective}, {"beta", t.beta}});
  j["trace"] = trace;
  return j;
}

void write_heatmap_svg(std::ostream& out, const Eigen::MatrixXd& values, const BoolMatrix* mask,
                       const std::string& title) {
  constexpr int kCell = 2;
  constexpr int kTop = 24;
  const auto rows = values.rows(), cols = values.cols();
  double vmax = 0.0;
  for (Index t = 0; t < rows; ++t)
    for (Index j = 0; j < cols; ++j)
      if ((!mask || (*mask)(t, j)) && std::isfinite(values(t, j))) vmax = std::max(vmax, values(t, j));
  const long width = std::max<long>(200, static_cast<long>(cols) * kCell);
  const long height = static_cast<long>(rows) * kCell + kTop;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" shape-rendering=\"crispEdges\">\n";
  out << "<text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(title)
      << " (max " << num(vmax) << ")</text>\n";
  // Runs of equal colour along a row collapse into one rectangle.
  for (Index t = 0; t < rows; ++t) {
    Index start = 0;
    std::string run_colour;
    auto colour_at = [&](Index j) {
      if (mask && !(*mask)(t, j)) return std::string("#d9d9d9");
      return ramp(vmax > 0.0 ? values(t, j) / vmax : 0.0);
    };
    for (Index j = 0; j <= cols; ++j) {
      const std::string c = j < cols ? colour_at(j) : std::string();
      if (j > 0 && c == run_colour) continue;
      if (j > 0) {
        out << "<rect x=\"" << start * kCell << "\" y=\"" << kTop + t * kCell << "\" width=\"" << (j - start) * kCell
            << "\" height=\"" << kCell << "\" fill=\"" << run_colour << "\"/>\n";
      }
      start = j;
      run_colour = c;
    }
  }
  out << "</svg>\n";
}

void write_grid_results_csv(std::ostream& out, const std::string& site_id, const std::vector<GridRun>& runs,
                            bool with_header) {
  if (with_header) out << header::kGridResults << '\n';
  for (const auto& r : runs) {
    const std::string status =
        !r.error.empty() ? "error"
                         : (r.fit.accepted() ? "accepted"
                                             : std::string(to_string(r.fit.reject_reason.value_or(RejectReason::NotConverged))));
    out << site_id << ',' << r.params.k << ',' << num(r.params.tau) << ',' << num(r.params.mu_left) << ','
        << num(r.params.mu_right) << ',' << num(r.params.mu_year) << ',' << num(100.0 * r.fit.beta) << ','
        << flag(r.error.empty() && r.fit.accepted()) << ',' << status << ',' << r.fit.iterations << '\n';
  }
}

void write_grid_scatter_csv(std::ostream& out, const std::string& site_id, const std::vector<GridRun>& runs,
                            bool with_header) {
  if (with_header) out << header::kGridScatter << '\n';
  for (const auto& r : runs) {
    if (!r.error.empty() || !r.fit.accepted()) continue;
    const std::string beta = num(100.0 * r.fit.beta);
    out << site_id << ",k," << r.params.k << ',' << beta << '\n';
    out << site_id << ",tau," << num(r.params.tau) << ',' << beta << '\n';
    out << site_id << ",mu_left," << num(r.params.mu_left) << ',' << beta << '\n';
    out << site_id << ",mu_right," << num(r.params.mu_right) << ',' << beta << '\n';
    out << site_id << ",mu_year," << num(r.params.mu_year) << ',' << beta << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << header::kHistogram << '\n';
  for (const auto& b : bins) out << num(b.lo) << ',' << num(b.hi) << ',' << b.count << '\n';
}

void write_tau_curves_csv(std::ostream& out, const std::vector<SweepCurve>& curves) {
  out << header::kTauCurves << '\n';
  for (const auto& c : curves) {
    const Eigen::VectorXd norm = c.normalized();
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const auto& pt = c.points[i];
      out << c.site_id << ',' << num(pt.tau) << ',' << num(100.0 * pt.beta) << ','
          << num(100.0 * norm(static_cast<Index>(i))) << ',' << flag(pt.accepted) << ',' << pt.status << '\n';
    }
  }
}

void write_tau_variability_csv(std::ostream& out, const TauVariability& v) {
  out << header::kTauVariability << '\n';
  for (std::size_t i = 0; i < v.candidates.size(); ++i) {
    out << num(v.candidates[i]) << ',' << num(v.variability[i]) << ',' << flag(v.candidates[i] == v.best_tau) << '\n';
  }
}

void write_tau_spread_csv(std::ostream& out, const std::vector<SweepCurve>& curves) {
  out << header::kTauSpread << '\n';
  for (const auto& c : curves) out << c.site_id << ',' << num(100.0 * c.spread()) << '\n';
}

void write_fleet_results_csv(std::ostream& out, const FleetResult& r) {
  out << header::kFleetResults << '\n';
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& s = r.records[i];
    out << s.site_id << ',' << (s.accepted ? num(s.beta_percent) : std::string()) << ',' << flag(s.accepted) << ','
        << s.reason << ',' << s.iterations << ',' << num(s.runtime_s) << ',' << s.clear_days << ','
        << (s.residual_slope ? num(*s.residual_slope) : std::string()) << ','
        << flag(i < r.outlier.size() && r.outlier[i]) << '\n';
  }
}

json summary_json(const FleetResult& r) {
  const auto& s = r.summary;
  json j{{"total", s.total},         {"included", s.included}, {"rejected", s.rejected},
         {"outliers", s.outliers},   {"positive", s.positive}, {"tukey", tukey_json(s.interval)}};
  if (s.included > 0) {
    j["median_percent"] = s.median;
    j["mean_percent"] = s.mean;
    j["std_percent"] = s.std;
  } else {
    j["median_percent"] = j["mean_percent"] = j["std_percent"] = nullptr;
  }
  json reasons = json::object();
  for (const auto& rec : r.records) {
    if (!rec.accepted) reasons[rec.reason] = reasons.value(rec.reason, 0) + 1;
  }
  j["rejections"] = reasons;
  return j;
}

void write_comparison_csv(std::ostream& out, const Comparison& c) {
  out << header::kComparison << '\n';
  for (const auto& row : c.rows) {
    out << row.site_id << ',' << num(row.scsf) << ',' << num(row.external) << ',' << num(row.lo) << ','
        << num(row.hi) << ',' << num(row.delta) << ',' << flag(row.within) << '\n';
  }
}

json comparison_json(const Comparison& c) {
  return {{"joined", c.rows.size()},
          {"within_fraction", c.within_fraction},
          {"quadrants",
           {{"both_negative", c.quadrants.both_negative},
            {"both_nonnegative", c.quadrants.both_nonnegative},
            {"scsf_negative_external_nonnegative", c.quadrants.scsf_negative_external_nonnegative},
            {"scsf_nonnegative_external_negative", c.quadrants.scsf_nonnegative_external_negative}}}};
}

json truth_json(const std::vector<SyntheticSite>& sites) {
  json list = json::array();
  for (const auto& s : sites) {
    const auto& sc = s.scenario;
    int cloudy = 0;
    for (bool b : s.cloudy) cloudy += b;
    list.push_back({{"site_id", s.site_id},
                    {"file", s.site_id + ".csv"},
                    {"beta", sc.beta},
                    {"beta_percent", 100.0 * sc.beta},
                    {"seed", sc.seed},
                    {"years", sc.years},
                    {"interval", sc.interval},
                    {"cloud_fraction", sc.cloud_fraction},
                    {"noise", sc.noise},
                    {"capacity_kw", sc.capacity_kw},
                    {"latitude", sc.latitude_deg},
                    {"capacity_shift", sc.capacity_shift},
                    {"missing_days", sc.missing_days},
                    {"cloudy_days", cloudy}});
  }
  return {{"sites", list}};
}

json error_json(const Error& e) { return {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}; }

}  // namespace scsf
