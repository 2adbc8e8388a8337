#include "scsf/model.hpp"

#include <algorithm>
#include <cmath>

#include "scsf/error.hpp"

namespace scsf {

std::vector<std::string> HyperParams::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorCode::TauOutOfRange, "tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "rank k must be at least 1");
  if (!(mu_left >= 0.0) || !(mu_right >= 0.0) || !(mu_year >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "smoothing weights must be nonnegative");
  }
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(beta_tol > 0.0) || !(subproblem_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerances must be positive");
  }
  std::vector<std::string> warnings;
  if (tau < 0.8 || tau > 0.9) {
    warnings.push_back("tau " + std::to_string(tau) +
                       " is outside [0.8, 0.9]; clear-sky estimates degrade outside this range");
  }
  return warnings;
}

LossWeights LossWeights::uniform(Eigen::Index m, Eigen::Index n) {
  return {Eigen::VectorXd::Ones(n), std::vector<bool>(static_cast<std::size_t>(m), true)};
}

double pinball_loss(double residual, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::TauOutOfRange, "tau must lie in (0, 1)");
  return residual >= 0.0 ? tau * residual : (tau - 1.0) * residual;
}

double second_diff_penalty(const Eigen::MatrixXd& mat, Axis axis) {
  const Eigen::MatrixXd& seq_major = mat;
  const auto len = axis == Axis::Columns ? mat.rows() : mat.cols();
  if (len < 3) throw Error(ErrorCode::AxisTooShort, "second differences need length >= 3");
  if (axis == Axis::Columns) {
    auto d2 = seq_major.topRows(len - 2) - 2.0 * seq_major.middleRows(1, len - 2) + seq_major.bottomRows(len - 2);
    return d2.squaredNorm();
  }
  auto d2 = seq_major.leftCols(len - 2) - 2.0 * seq_major.middleCols(1, len - 2) + seq_major.rightCols(len - 2);
  return d2.squaredNorm();
}

Eigen::MatrixXd second_diff_operator(Eigen::Index len) {
  if (len < 3) throw Error(ErrorCode::AxisTooShort, "second differences need length >= 3");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(len - 2, len);
  for (Eigen::Index i = 0; i < len - 2; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -2.0;
    d(i, i + 2) = 1.0;
  }
  return d;
}

double yearly_penalty(const Eigen::MatrixXd& right, double gamma) {
  const auto pairs = right.cols() - kYearLag;
  if (pairs <= 0) return 0.0;
  return (right.rightCols(pairs) - gamma * right.leftCols(pairs)).squaredNorm();
}

Eigen::MatrixXd reconstruct(const Factorization& f) {
  if (f.left.cols() != f.right.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "left has " + std::to_string(f.left.cols()) +
                                                  " columns, right has " + std::to_string(f.right.rows()) +
                                                  " rows");
  }
  return (f.left * f.right).cwiseMax(0.0);
}

DailyEnergy daily_energy(const Eigen::MatrixXd& clear_sky, double delta_t) {
  if (!(delta_t > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta_t must be positive");
  return {delta_t * clear_sky.colwise().sum().transpose()};
}

Eigen::VectorXd linear_daily_energy(const Factorization& f, double delta_t) {
  if (f.left.cols() != f.right.rows()) throw Error(ErrorCode::DimensionMismatch, "rank mismatch");
  Eigen::RowVectorXd basis_energy = delta_t * f.left.colwise().sum();
  return (basis_energy * f.right).transpose();
}

std::vector<Eigen::Index> constrained_days(const Eigen::VectorXd& d_prev, double eps) {
  const auto pairs = d_prev.size() - kYearLag;
  std::vector<Eigen::Index> days;
  if (pairs <= 0) return days;
  std::vector<double> sorted(d_prev.data(), d_prev.data() + d_prev.size());
  const double med = percentile(std::move(sorted), 50.0);
  if (!(med > 0.0)) {
    throw Error(ErrorCode::NonpositiveDenominator, "median bootstrap daily energy is not positive");
  }
  const double floor = eps * med;
  for (Eigen::Index i = 0; i < pairs; ++i) {
    if (d_prev(i) >= floor) days.push_back(i);
  }
  return days;
}

ObjectiveTerms objective(const PowerMatrix& p, const Factorization& f, const HyperParams& hp,
                         const DegradationState& state, const LossWeights& weights) {
  const auto m = p.rows();
  const auto n = p.cols();
  if (f.left.rows() != m || f.right.cols() != n || f.left.cols() != f.right.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "factorization does not conform to the power matrix");
  }
  if (weights.day_weight.size() != n || static_cast<Eigen::Index>(weights.active_rows.size()) != m) {
    throw Error(ErrorCode::DimensionMismatch, "loss weights do not conform to the power matrix");
  }
  if (n > kYearLag && state.d_prev.size() == n) constrained_days(state.d_prev);

  ObjectiveTerms terms;
  const Eigen::MatrixXd fitted = f.left * f.right;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double w = weights.day_weight(j);
    if (w == 0.0) continue;
    double col = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (p.mask(i, j) && weights.active_rows[static_cast<std::size_t>(i)]) {
        col += pinball_loss(p.data(i, j) - fitted(i, j), hp.tau);
      }
    }
    terms.data += w * col;
  }
  if (m >= 3) terms.left_smooth = hp.mu_left * second_diff_penalty(f.left, Axis::Columns);
  if (n >= 3) terms.right_smooth = hp.mu_right * second_diff_penalty(f.right, Axis::Rows);
  terms.yearly = hp.mu_year * yearly_penalty(f.right, state.gamma());
  return terms;
}

ObjectiveTerms objective(const PowerMatrix& p, const Factorization& f, const HyperParams& hp,
                         const DegradationState& state) {
  return objective(p, f, hp, state, LossWeights::uniform(p.rows(), p.cols()));
}

}  // namespace scsf
