#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scsf/ingest.hpp"

namespace scsf {

inline constexpr int kYearLag = 365;

// left: m x k daily-shape basis, right: k x n day weights.
struct Factorization {
  Eigen::MatrixXd left;
  Eigen::MatrixXd right;

  Eigen::Index rank() const { return left.cols(); }
};

struct HyperParams {
  int k = 6;
  double tau = 0.85;
  double mu_left = 500.0;
  double mu_right = 1000.0;
  double mu_year = 100.0;
  int max_iters = 100;
  double beta_tol = 1e-5;
  double subproblem_tol = 1e-6;
  bool fit_degradation = true;  // false freezes beta at 0

  // Throws on invalid settings; returns advisory warnings (tau outside [0.8, 0.9]).
  std::vector<std::string> validate() const;
};

struct DailyEnergy {
  Eigen::VectorXd kwh;
};

// beta is the previous sweep's rate; d_prev the bootstrap denominator.
struct DegradationState {
  double beta = 0.0;
  Eigen::VectorXd d_prev;

  double gamma() const { return 1.0 + beta; }
};

// Per-day loss weights and the rows that enter the quantile loss.
struct LossWeights {
  Eigen::VectorXd day_weight;
  std::vector<bool> active_rows;

  static LossWeights uniform(Eigen::Index m, Eigen::Index n);
};

struct ObjectiveTerms {
  double data = 0.0;
  double left_smooth = 0.0;
  double right_smooth = 0.0;
  double yearly = 0.0;

  double total() const { return data + left_smooth + right_smooth + yearly; }
};

enum class Axis { Rows, Columns };

double pinball_loss(double residual, double tau);

// Sum of squared second differences along each column (Axis::Columns) or each row.
double second_diff_penalty(const Eigen::MatrixXd& mat, Axis axis);

// Banded (len-2) x len second-difference operator.
Eigen::MatrixXd second_diff_operator(Eigen::Index len);

// sum_{i < n-365} |right(:, i+365) - gamma * right(:, i)|^2
double yearly_penalty(const Eigen::MatrixXd& right, double gamma);

Eigen::MatrixXd reconstruct(const Factorization& f);

DailyEnergy daily_energy(const Eigen::MatrixXd& clear_sky, double delta_t);

// delta_t * 1' L R without the clamp; linear in either factor.
Eigen::VectorXd linear_daily_energy(const Factorization& f, double delta_t);

// Days i (with i + 365 < n) whose denominator clears eps * median(d_prev).
// Throws NonpositiveDenominator when the median itself is not positive.
std::vector<Eigen::Index> constrained_days(const Eigen::VectorXd& d_prev, double eps = 0.05);

ObjectiveTerms objective(const PowerMatrix& p, const Factorization& f, const HyperParams& hp,
                         const DegradationState& state, const LossWeights& weights);

ObjectiveTerms objective(const PowerMatrix& p, const Factorization& f, const HyperParams& hp,
                         const DegradationState& state);

}  // namespace scsf
