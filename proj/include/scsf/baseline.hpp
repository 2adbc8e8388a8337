#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scsf/ingest.hpp"
#include "scsf/solver.hpp"

namespace scsf {

inline constexpr double kClearThreshold = 0.8;
inline constexpr double kWeightFloor = 0.05;
inline constexpr int kMinClearDays = 20;

struct ClearDayScore {
  Eigen::VectorXd score;  // per day, in [0, 1]
  std::vector<bool> flags;

  Eigen::Index count() const;
};

// Product of two scale-free sub-scores, each clipped to [0, 1]:
//   smoothness  1 - 10 * |D2 x|^2 / |x|^2 over the day's observed profile
//   envelope    daily energy / rolling 90th percentile of daily energy (+-10 days)
// A day with no observations scores 0.
ClearDayScore detect_clear_days(const PowerMatrix& p, double threshold = kClearThreshold);

// Loss weights: the clear-day score floored so cloudy days still count.
Eigen::VectorXd clear_day_weights(const ClearDayScore& score, double floor = kWeightFloor);

struct ResidualDiagnostics {
  std::vector<Eigen::Index> days;
  Eigen::VectorXd measured;    // kWh over the day's observed samples
  Eigen::VectorXd clear_sky;   // kWh over the same samples
  Eigen::VectorXd residuals;   // measured - clear_sky
  double slope = 0.0;          // kWh per day
  double intercept = 0.0;      // kWh
  double half_width = 0.0;     // 95% normal-approximation half-width of slope
};

// Residuals on flagged days, compared over each day's observed samples, and
// their least-squares trend against day index. Throws TooFewClearDays.
ResidualDiagnostics clear_day_residuals(const PowerMatrix& p, const FitResult& fit, const std::vector<bool>& flags);

struct DegradationReport {
  double beta_percent = 0.0;
  std::string rate_text;  // e.g. "−2.6 %/yr"
  int iterations = 0;
  bool accepted = false;
  std::string status;     // "accepted" or the reject reason
  std::optional<double> residual_slope;
  std::optional<double> residual_half_width;
  Eigen::Index clear_days = 0;
};

// One decimal, U+2212 for negative values, never "−0.0".
std::string format_rate(double beta);

DegradationReport degradation_report(const FitResult& fit, const ResidualDiagnostics* diag, Eigen::Index clear_days);

// Full single-site pipeline: clear-day weights, fit, and (when enough clear
// days exist and the fit was accepted) residual diagnostics.
struct SiteAnalysis {
  ClearDayScore clear;
  FitResult fit;
  std::optional<ResidualDiagnostics> diagnostics;
  DegradationReport report;
};

SiteAnalysis analyze_site(const PowerMatrix& p, const HyperParams& hp);

}  // namespace scsf
