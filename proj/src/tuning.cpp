#include "scsf/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scsf/baseline.hpp"
#include "scsf/error.hpp"
#include "scsf/parallel.hpp"

namespace scsf {

namespace {

constexpr double kTauMatch = 1e-9;

template <class T>
void require_nonempty(const std::vector<T>& values, const char* name) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, std::string("grid list '") + name + "' is empty");
}

std::string describe(const FitResult& fit) {
  if (fit.accepted()) return "accepted";
  return std::string(to_string(fit.reject_reason.value_or(RejectReason::NotConverged)));
}

}  // namespace

HyperParams GridPoint::apply(HyperParams base) const {
  base.k = k;
  base.tau = tau;
  base.mu_left = mu_left;
  base.mu_right = mu_right;
  base.mu_year = mu_year;
  return base;
}

GridSpec GridSpec::standard() {
  GridSpec g;
  g.k = {4, 6, 8};
  g.tau = {0.8, 0.85, 0.9};
  g.mu_left = {100.0, 500.0, 1000.0};
  g.mu_right = {500.0, 1000.0, 5000.0};
  g.mu_year = {100.0};
  return g;
}

std::size_t GridSpec::size() const { return k.size() * tau.size() * mu_left.size() * mu_right.size() * mu_year.size(); }

void GridSpec::validate() const {
  require_nonempty(k, "k");
  require_nonempty(tau, "tau");
  require_nonempty(mu_left, "mu_left");
  require_nonempty(mu_right, "mu_right");
  require_nonempty(mu_year, "mu_year");
  for (const auto& pt : points()) pt.apply({}).validate();
}

std::vector<GridPoint> GridSpec::points() const {
  std::vector<GridPoint> out;
  out.reserve(size());
  for (int kk : k)
    for (double t : tau)
      for (double ml : mu_left)
        for (double mr : mu_right)
          for (double my : mu_year) out.push_back({kk, t, ml, mr, my});
  return out;
}

std::vector<GridRun> grid_search(const PowerMatrix& p, const GridSpec& grid, const HyperParams& base, int workers) {
  grid.validate();
  const auto pts = grid.points();
  const Eigen::VectorXd weights = clear_day_weights(detect_clear_days(p));
  std::vector<GridRun> runs(pts.size());
  parallel_for(pts.size(), workers, [&](std::size_t i) {
    runs[i].params = pts[i];
    try {
      runs[i].fit = fit(p, pts[i].apply(base), weights);
    } catch (const std::exception& e) {
      runs[i].error = e.what();
    }
  });
  return runs;
}

std::vector<double> tau_grid(double lo, double hi, double step) {
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw Error(ErrorCode::TauOutOfRange, "tau sweep needs 0 < lo < hi < 1");
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::StepInvalid, "tau step must be positive");
  const double intervals = (hi - lo) / step;
  const double rounded = std::round(intervals);
  if (rounded < 1.0 || std::abs(intervals - rounded) > 1e-6) {
    throw Error(ErrorCode::StepInvalid, "tau step does not divide the sweep range");
  }
  std::vector<double> taus;
  const auto count = static_cast<int>(rounded);
  for (int i = 0; i <= count; ++i) taus.push_back(i == count ? hi : lo + step * i);
  return taus;
}

std::size_t SweepCurve::index_of(double tau) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(points[i].tau - tau) <= kTauMatch) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "tau " + std::to_string(tau) + " is not on the sweep");
}

Eigen::VectorXd SweepCurve::normalized(double reference) const {
  const double ref = points[index_of(reference)].beta;
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out(static_cast<Eigen::Index>(i)) = points[i].beta - ref;
  return out;
}

double SweepCurve::spread() const {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& pt : points) {
    if (!pt.accepted) continue;
    lo = any ? std::min(lo, pt.beta) : pt.beta;
    hi = any ? std::max(hi, pt.beta) : pt.beta;
    any = true;
  }
  return hi - lo;
}

SweepCurve tau_sweep(const PowerMatrix& p, const HyperParams& base, double lo, double hi, double step,
                     double nominal_tau, int workers, std::string site_id) {
  const auto taus = tau_grid(lo, hi, step);
  SweepCurve curve;
  curve.site_id = std::move(site_id);
  curve.nominal_tau = nominal_tau;
  curve.points.resize(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) curve.points[i].tau = taus[i];
  curve.index_of(nominal_tau);

  const Eigen::VectorXd weights = clear_day_weights(detect_clear_days(p));
  parallel_for(taus.size(), workers, [&](std::size_t i) {
    auto hp = base;
    hp.tau = taus[i];
    auto& pt = curve.points[i];
    try {
      const auto r = fit(p, hp, weights);
      pt.beta = r.beta;
      pt.accepted = r.accepted();
      pt.status = describe(r);
    } catch (const std::exception& e) {
      pt.beta = std::numeric_limits<double>::quiet_NaN();
      pt.status = e.what();
    }
  });
  return curve;
}

TauVariability tau_variability(const std::vector<SweepCurve>& curves, std::vector<double> candidates) {
  if (curves.empty()) throw Error(ErrorCode::TooFewValues, "tau variability needs at least one curve");
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate taus");
  std::sort(candidates.begin(), candidates.end());
  TauVariability out;
  out.candidates = candidates;
  for (double c : candidates) {
    double total = 0.0;
    for (const auto& curve : curves) total += curve.normalized(c).squaredNorm();
    out.variability.push_back(total);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (out.variability[i] < out.variability[best]) best = i;
  }
  out.best_tau = candidates[best];
  return out;
}

}  // namespace scsf
