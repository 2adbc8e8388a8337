#include "scsf/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "scsf/error.hpp"

namespace scsf {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

constexpr double kRoughnessGain = 10.0;
constexpr Index kEnvelopeHalfWindow = 10;
constexpr double kEnvelopePercentile = 90.0;
constexpr double kNormalQuantile975 = 1.959963984540054;

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// Second differences only over runs of three consecutive observed samples.
double smoothness(const PowerMatrix& p, Index day) {
  double rough = 0.0, energy = 0.0;
  for (Index t = 0; t < p.rows(); ++t) {
    if (!p.mask(t, day)) continue;
    energy += p.data(t, day) * p.data(t, day);
    if (t + 2 < p.rows() && p.mask(t + 1, day) && p.mask(t + 2, day)) {
      const double d2 = p.data(t, day) - 2.0 * p.data(t + 1, day) + p.data(t + 2, day);
      rough += d2 * d2;
    }
  }
  if (!(energy > 0.0)) return 0.0;
  return clip01(1.0 - kRoughnessGain * rough / energy);
}

}  // namespace

Eigen::Index ClearDayScore::count() const { return std::count(flags.begin(), flags.end(), true); }

ClearDayScore detect_clear_days(const PowerMatrix& p, double threshold) {
  const Index n = p.cols();
  VectorXd energy = VectorXd::Zero(n);
  std::vector<bool> observed(static_cast<std::size_t>(n), false);
  for (Index j = 0; j < n; ++j) {
    for (Index t = 0; t < p.rows(); ++t) {
      if (!p.mask(t, j)) continue;
      energy(j) += p.data(t, j) * p.delta_t;
      observed[static_cast<std::size_t>(j)] = true;
    }
  }

  ClearDayScore out;
  out.score = VectorXd::Zero(n);
  out.flags.assign(static_cast<std::size_t>(n), false);
  std::vector<double> window;
  for (Index j = 0; j < n; ++j) {
    if (!observed[static_cast<std::size_t>(j)]) continue;
    window.clear();
    for (Index i = std::max<Index>(0, j - kEnvelopeHalfWindow); i <= std::min(n - 1, j + kEnvelopeHalfWindow); ++i) {
      if (observed[static_cast<std::size_t>(i)]) window.push_back(energy(i));
    }
    const double envelope = percentile(window, kEnvelopePercentile);
    const double proximity = envelope > 0.0 ? clip01(energy(j) / envelope) : 0.0;
    out.score(j) = smoothness(p, j) * proximity;
    out.flags[static_cast<std::size_t>(j)] = out.score(j) >= threshold;
  }
  return out;
}

Eigen::VectorXd clear_day_weights(const ClearDayScore& score, double floor) {
  return score.score.cwiseMax(floor).cwiseMin(1.0);
}

ResidualDiagnostics clear_day_residuals(const PowerMatrix& p, const FitResult& fit, const std::vector<bool>& flags) {
  if (static_cast<Index>(flags.size()) != p.cols() || fit.clear_sky.cols() != p.cols() ||
      fit.clear_sky.rows() != p.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "flags, fit and power matrix disagree in shape");
  }
  ResidualDiagnostics out;
  std::vector<double> measured, modeled;
  for (Index j = 0; j < p.cols(); ++j) {
    if (!flags[static_cast<std::size_t>(j)]) continue;
    double m = 0.0, c = 0.0;
    bool any = false;
    for (Index t = 0; t < p.rows(); ++t) {
      if (!p.mask(t, j)) continue;
      m += p.data(t, j);
      c += fit.clear_sky(t, j);
      any = true;
    }
    if (!any) continue;
    out.days.push_back(j);
    measured.push_back(m * p.delta_t);
    modeled.push_back(c * p.delta_t);
  }
  const auto count = static_cast<Index>(out.days.size());
  if (count < kMinClearDays) {
    throw Error(ErrorCode::TooFewClearDays,
                std::to_string(count) + " clear days, need " + std::to_string(kMinClearDays));
  }
  out.measured = Eigen::Map<const VectorXd>(measured.data(), count);
  out.clear_sky = Eigen::Map<const VectorXd>(modeled.data(), count);
  out.residuals = out.measured - out.clear_sky;

  VectorXd x(count);
  for (Index i = 0; i < count; ++i) x(i) = static_cast<double>(out.days[static_cast<std::size_t>(i)]);
  const double xm = x.mean();
  const double ym = out.residuals.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double sxy = ((x.array() - xm) * (out.residuals.array() - ym)).sum();
  out.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  out.intercept = ym - out.slope * xm;
  const VectorXd fitted = (out.intercept + out.slope * x.array()).matrix();
  const double sse = (out.residuals - fitted).squaredNorm();
  const double se = sxx > 0.0 ? std::sqrt(sse / static_cast<double>(count - 2) / sxx) : 0.0;
  out.half_width = kNormalQuantile975 * se;
  return out;
}

std::string format_rate(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", std::abs(100.0 * beta));
  const bool negative = beta < 0.0 && std::string(buf) != "0.0";
  return std::string(negative ? "−" : "") + buf + " %/yr";
}

DegradationReport degradation_report(const FitResult& fit, const ResidualDiagnostics* diag, Eigen::Index clear_days) {
  DegradationReport r;
  r.beta_percent = 100.0 * fit.beta;
  r.rate_text = format_rate(fit.beta);
  r.iterations = fit.iterations;
  r.accepted = fit.accepted();
  r.status = r.accepted ? "accepted" : std::string(to_string(fit.reject_reason.value_or(RejectReason::NotConverged)));
  if (diag) {
    r.residual_slope = diag->slope;
    r.residual_half_width = diag->half_width;
  }
  r.clear_days = clear_days;
  return r;
}

SiteAnalysis analyze_site(const PowerMatrix& p, const HyperParams& hp) {
  SiteAnalysis a;
  a.clear = detect_clear_days(p);
  a.fit = fit(p, hp, clear_day_weights(a.clear));
  if (a.fit.accepted() && a.clear.count() >= kMinClearDays) {
    a.diagnostics = clear_day_residuals(p, a.fit, a.clear.flags);
  }
  a.report = degradation_report(a.fit, a.diagnostics ? &*a.diagnostics : nullptr, a.clear.count());
  return a;
}

}  // namespace scsf
