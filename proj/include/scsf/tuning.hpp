#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scsf/ingest.hpp"
#include "scsf/model.hpp"
#include "scsf/solver.hpp"

namespace scsf {

struct GridPoint {
  int k = 6;
  double tau = 0.85;
  double mu_left = 500.0;
  double mu_right = 1000.0;
  double mu_year = 100.0;

  HyperParams apply(HyperParams base) const;
};

// Value lists per parameter; the grid is their Cartesian product.
struct GridSpec {
  std::vector<int> k{6};
  std::vector<double> tau{0.85};
  std::vector<double> mu_left{500.0};
  std::vector<double> mu_right{1000.0};
  std::vector<double> mu_year{100.0};

  // Low/medium/high values for k, tau, mu_left and mu_right; mu_year fixed.
  static GridSpec standard();

  std::size_t size() const;
  void validate() const;  // throws InvalidArgument on an empty list

  // Lexicographic order: k, then tau, mu_left, mu_right, mu_year.
  std::vector<GridPoint> points() const;
};

struct GridRun {
  GridPoint params;
  FitResult fit;
  std::string error;  // set when the fit threw; fit is then default
};

// One independent fit per grid point, each using the same clear-day weights.
// Output order follows GridSpec::points() whatever the worker count.
std::vector<GridRun> grid_search(const PowerMatrix& p, const GridSpec& grid, const HyperParams& base = {},
                                 int workers = 1);

inline constexpr double kTauLo = 0.8;
inline constexpr double kTauHi = 0.9;
inline constexpr double kTauStep = 0.005;
inline constexpr double kNominalTau = 0.85;

// Evenly spaced taus lo, lo + step, ..., hi. Throws StepInvalid unless the
// step is positive and divides the range, TauOutOfRange unless 0 < lo < hi < 1.
std::vector<double> tau_grid(double lo = kTauLo, double hi = kTauHi, double step = kTauStep);

struct SweepPoint {
  double tau = 0.0;
  double beta = 0.0;  // fractional per year
  bool accepted = false;
  std::string status;
};

struct SweepCurve {
  std::string site_id;
  double nominal_tau = kNominalTau;
  std::vector<SweepPoint> points;  // tau strictly increasing

  // Index of the point at `tau` (within 1e-9); throws InvalidArgument if absent.
  std::size_t index_of(double tau) const;
  // beta(tau) - beta(reference) at every point.
  Eigen::VectorXd normalized(double reference) const;
  Eigen::VectorXd normalized() const { return normalized(nominal_tau); }
  // max - min of beta over the accepted points; 0 when none are accepted.
  double spread() const;
};

SweepCurve tau_sweep(const PowerMatrix& p, const HyperParams& base = {}, double lo = kTauLo, double hi = kTauHi,
                     double step = kTauStep, double nominal_tau = kNominalTau, int workers = 1,
                     std::string site_id = {});

struct TauVariability {
  double best_tau = 0.0;
  std::vector<double> candidates;   // ascending
  std::vector<double> variability;  // sum over curves and points of normalized^2
};

// Ties go to the smallest candidate. Every candidate must lie on every curve.
TauVariability tau_variability(const std::vector<SweepCurve>& curves, std::vector<double> candidates);

}  // namespace scsf
