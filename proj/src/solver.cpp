#include "scsf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "scsf/error.hpp"

namespace scsf {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

constexpr double kDenominatorEps = 0.05;
constexpr double kMinDaytimeCoverage = 0.3;
constexpr int kInteriorPointBudget = 200;
// A sweep counts as settled only once the objective has also stopped moving;
// beta alone can pause while it turns around.
constexpr double kObjectiveStall = 1e-3;

// Adds weight * D2'D2 along a sequence of `len` variables at idx(0..len-1).
template <typename IndexFn>
void add_second_diff(Triplets& t, Index len, double weight, IndexFn idx) {
  if (len < 3 || weight == 0.0) return;
  static constexpr double kCoef[3] = {1.0, -2.0, 1.0};
  for (Index s = 0; s + 2 < len; ++s) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        t.emplace_back(idx(s + a), idx(s + b), weight * kCoef[a] * kCoef[b]);
      }
    }
  }
}

SparseMatrix to_sparse(Index n, const Triplets& t) {
  SparseMatrix q(n, n);
  q.setFromTriplets(t.begin(), t.end());
  return q;
}

double full_objective(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                      const DegradationState& state) {
  return objective(pp.power, f, hp, state, pp.weights).total();
}

MatrixXd unpack_right(const VectorXd& x, Index k, Index n) {
  MatrixXd r(k, n);
  for (Index i = 0; i < n; ++i) r.col(i) = x.segment(i * k, k);
  return r;
}

MatrixXd unpack_left(const VectorXd& x, Index m, Index k) {
  MatrixXd l(m, k);
  for (Index t = 0; t < m; ++t) l.row(t) = x.segment(t * k, k).transpose();
  return l;
}

VectorXd pack_right(const MatrixXd& r, std::optional<double> beta) {
  VectorXd x(r.size() + (beta ? 1 : 0));
  for (Index i = 0; i < r.cols(); ++i) x.segment(i * r.rows(), r.rows()) = r.col(i);
  if (beta) x(r.size()) = *beta;
  return x;
}

VectorXd pack_left(const MatrixXd& l) {
  VectorXd x(l.size());
  for (Index t = 0; t < l.rows(); ++t) x.segment(t * l.cols(), l.cols()) = l.row(t).transpose();
  return x;
}

SubsolveOptions step_options(const HyperParams& hp) {
  SubsolveOptions o;
  o.tol = hp.subproblem_tol;
  o.max_iters = kInteriorPointBudget;
  o.throw_on_stall = false;
  o.polish = false;
  return o;
}

}  // namespace

std::string_view to_string(RejectReason reason) noexcept {
  switch (reason) {
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooSparse: return "TooSparse";
    case RejectReason::NotConverged: return "NotConverged";
    case RejectReason::Degenerate: return "Degenerate";
  }
  return "Unknown";
}

PreparedPower prepare_power(const PowerMatrix& p, const Eigen::VectorXd& day_weights) {
  PreparedPower pp;
  pp.scale = robust_scale(p);
  if (!(pp.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "power matrix has no positive observations");
  pp.power = p;
  pp.power.data /= pp.scale;
  pp.weights.active_rows = daytime_rows(p, 0.01);
  if (day_weights.size() == 0) {
    pp.weights.day_weight = VectorXd::Ones(p.cols());
  } else {
    if (day_weights.size() != p.cols()) throw Error(ErrorCode::DimensionMismatch, "one weight per day expected");
    pp.weights.day_weight = day_weights.cwiseMax(0.0);
  }
  return pp;
}

Factorization initialize(const PowerMatrix& p, int k, double tau) {
  const Index m = p.rows();
  const Index n = p.cols();
  if (k < 1 || k > std::min(m, n)) {
    throw Error(ErrorCode::RankTooLarge, "rank " + std::to_string(k) + " exceeds matrix dimensions");
  }
  MatrixXd filled = p.data;
  std::vector<double> row;
  for (Index i = 0; i < m; ++i) {
    row.clear();
    for (Index j = 0; j < n; ++j) {
      if (p.mask(i, j)) row.push_back(p.data(i, j));
    }
    const double fill = row.empty() ? 0.0 : percentile(row, 100.0 * tau);
    for (Index j = 0; j < n; ++j) {
      if (!p.mask(i, j)) filled(i, j) = fill;
    }
  }
  Eigen::BDCSVD<MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd root = svd.singularValues().head(k).cwiseSqrt();
  Factorization f;
  f.left = svd.matrixU().leftCols(k) * root.asDiagonal();
  f.right = root.asDiagonal() * svd.matrixV().leftCols(k).transpose();
  if (f.left.col(0).sum() < 0.0) {
    f.left.col(0) *= -1.0;
    f.right.row(0) *= -1.0;
  }
  return f;
}

ConvexSubproblem right_subproblem(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                                  const DegradationState& state) {
  const PowerMatrix& p = pp.power;
  const Index m = p.rows();
  const Index n = p.cols();
  const Index k = f.rank();
  const bool free_beta = hp.fit_degradation;
  const Index nvars = k * n + (free_beta ? 1 : 0);
  auto idx = [k](Index r, Index i) { return i * k + r; };

  auto sub = ConvexSubproblem::with_vars(nvars);
  sub.tau = hp.tau;

  Triplets quad;
  for (Index r = 0; r < k; ++r) {
    add_second_diff(quad, n, 2.0 * hp.mu_right, [&](Index i) { return idx(r, i); });
  }
  if (hp.mu_year > 0.0 && n > kYearLag) {
    const double g = state.gamma();
    const double w = 2.0 * hp.mu_year;
    for (Index i = 0; i + kYearLag < n; ++i) {
      for (Index r = 0; r < k; ++r) {
        const Index a = idx(r, i), b = idx(r, i + kYearLag);
        quad.emplace_back(a, a, w * g * g);
        quad.emplace_back(b, b, w);
        quad.emplace_back(a, b, -w * g);
        quad.emplace_back(b, a, -w * g);
      }
    }
  }
  sub.quad = to_sparse(nvars, quad);

  Index rows = 0;
  for (Index j = 0; j < n; ++j) {
    if (pp.weights.day_weight(j) <= 0.0) continue;
    for (Index t = 0; t < m; ++t) rows += (p.mask(t, j) && pp.weights.active_rows[static_cast<std::size_t>(t)]) ? 1 : 0;
  }
  sub.pinball_rows = SparseRowMatrix(rows, nvars);
  sub.pinball_rows.reserve(rows * k);
  sub.pinball_target.resize(rows);
  sub.pinball_weight.resize(rows);
  Index row = 0;
  for (Index j = 0; j < n; ++j) {
    const double w = pp.weights.day_weight(j);
    if (w <= 0.0) continue;
    for (Index t = 0; t < m; ++t) {
      if (!p.mask(t, j) || !pp.weights.active_rows[static_cast<std::size_t>(t)]) continue;
      sub.pinball_rows.startVec(row);
      for (Index r = 0; r < k; ++r) sub.pinball_rows.insertBack(row, idx(r, j)) = f.left(t, r);
      sub.pinball_target(row) = p.data(t, j);
      sub.pinball_weight(row) = w;
      ++row;
    }
  }
  sub.pinball_rows.finalize();

  if (n > kYearLag) {
    const auto days = constrained_days(state.d_prev, kDenominatorEps);
    const VectorXd s = p.delta_t * f.left.colwise().sum().transpose();
    sub.eq_matrix = SparseRowMatrix(static_cast<Index>(days.size()), nvars);
    sub.eq_matrix.reserve(static_cast<Index>(days.size()) * (2 * k + 1));
    sub.eq_rhs = VectorXd::Zero(static_cast<Index>(days.size()));
    for (std::size_t c = 0; c < days.size(); ++c) {
      const Index i = days[c];
      const auto ci = static_cast<Index>(c);
      sub.eq_matrix.startVec(ci);
      // idx(r, i) < idx(r', i + 365) for every r, r', so insertion stays sorted
      for (Index r = 0; r < k; ++r) sub.eq_matrix.insertBack(ci, idx(r, i)) = -s(r);
      for (Index r = 0; r < k; ++r) sub.eq_matrix.insertBack(ci, idx(r, i + kYearLag)) = s(r);
      if (free_beta) {
        sub.eq_matrix.insertBack(ci, k * n) = -state.d_prev(i);
      } else {
        sub.eq_rhs(ci) = 0.0;
      }
    }
    sub.eq_matrix.finalize();
  }
  return sub;
}

ConvexSubproblem left_subproblem(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                                 const DegradationState& state, double beta) {
  const PowerMatrix& p = pp.power;
  const Index m = p.rows();
  const Index n = p.cols();
  const Index k = f.rank();
  const Index nvars = m * k;
  auto idx = [k](Index t, Index r) { return t * k + r; };

  auto sub = ConvexSubproblem::with_vars(nvars);
  sub.tau = hp.tau;

  Triplets quad;
  for (Index r = 0; r < k; ++r) {
    add_second_diff(quad, m, 2.0 * hp.mu_left, [&](Index t) { return idx(t, r); });
  }
  sub.quad = to_sparse(nvars, quad);

  Index rows = 0;
  for (Index t = 0; t < m; ++t) {
    if (!pp.weights.active_rows[static_cast<std::size_t>(t)]) continue;
    for (Index j = 0; j < n; ++j) rows += (p.mask(t, j) && pp.weights.day_weight(j) > 0.0) ? 1 : 0;
  }
  sub.pinball_rows = SparseRowMatrix(rows, nvars);
  sub.pinball_rows.reserve(rows * k);
  sub.pinball_target.resize(rows);
  sub.pinball_weight.resize(rows);
  Index row = 0;
  for (Index t = 0; t < m; ++t) {
    if (!pp.weights.active_rows[static_cast<std::size_t>(t)]) continue;
    for (Index j = 0; j < n; ++j) {
      const double w = pp.weights.day_weight(j);
      if (!p.mask(t, j) || w <= 0.0) continue;
      sub.pinball_rows.startVec(row);
      for (Index r = 0; r < k; ++r) sub.pinball_rows.insertBack(row, idx(t, r)) = f.right(r, j);
      sub.pinball_target(row) = p.data(t, j);
      sub.pinball_weight(row) = w;
      ++row;
    }
  }
  sub.pinball_rows.finalize();

  // The constraint only sees v = L'1: rows delta_t (R_{i+365} - R_i)' v = beta d_prev_i.
  // It is overdetermined in v, so it is imposed on the row space of that system.
  // Rows outside the loss are pinned to zero so the baseline vanishes at night.
  Triplets eq;
  std::vector<double> rhs;
  if (n > kYearLag) {
    const auto days = constrained_days(state.d_prev, kDenominatorEps);
    if (!days.empty()) {
      MatrixXd a(static_cast<Index>(days.size()), k);
      VectorXd b(static_cast<Index>(days.size()));
      for (std::size_t c = 0; c < days.size(); ++c) {
        const Index i = days[c];
        a.row(static_cast<Index>(c)) = p.delta_t * (f.right.col(i + kYearLag) - f.right.col(i)).transpose();
        b(static_cast<Index>(c)) = beta * state.d_prev(i);
      }
      Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const VectorXd& sv = svd.singularValues();
      Index rank = 0;
      while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
      const VectorXd v_ls = svd.solve(b);
      const MatrixXd basis = svd.matrixV().leftCols(rank);
      const VectorXd target = basis.transpose() * v_ls;
      for (Index c = 0; c < rank; ++c) {
        for (Index t = 0; t < m; ++t) {
          for (Index r = 0; r < k; ++r) eq.emplace_back(c, idx(t, r), basis(r, c));
        }
        rhs.push_back(target(c));
      }
    }
  }
  for (Index t = 0; t < m; ++t) {
    if (pp.weights.active_rows[static_cast<std::size_t>(t)]) continue;
    for (Index r = 0; r < k; ++r) {
      eq.emplace_back(static_cast<Index>(rhs.size()), idx(t, r), 1.0);
      rhs.push_back(0.0);
    }
  }
  sub.eq_matrix = SparseRowMatrix(static_cast<Index>(rhs.size()), nvars);
  sub.eq_matrix.setFromTriplets(eq.begin(), eq.end());
  sub.eq_rhs = Eigen::Map<const VectorXd>(rhs.data(), static_cast<Index>(rhs.size()));
  return sub;
}

StepOutput solve_right_step(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                            const DegradationState& state, double beta, const WarmStart* warm) {
  const Index k = f.rank();
  const Index n = pp.power.cols();
  const auto sub = right_subproblem(pp, f, hp, state);
  const bool free_beta = hp.fit_degradation;

  WarmStart start = warm ? *warm : WarmStart{};
  start.x = project_onto_equalities(sub.eq_matrix, sub.eq_rhs,
                                    pack_right(f.right, free_beta ? std::optional<double>(beta) : std::nullopt));
  Factorization trial = f;
  trial.right = unpack_right(start.x, k, n);

  StepOutput out;
  out.record.kind = StepKind::Right;
  out.record.start_objective = full_objective(pp, trial, hp, state);

  const auto res = convex_subsolve(sub, step_options(hp), &start);
  trial.right = unpack_right(res.x, k, n);
  out.record.end_objective = full_objective(pp, trial, hp, state);
  out.record.subsolver_iterations = res.iterations;
  out.record.certified = res.certified;
  out.warm = res.warm;
  if (out.record.end_objective <= out.record.start_objective) {
    out.factor = std::move(trial.right);
    out.beta = free_beta ? res.x(k * n) : 0.0;
  } else {
    out.record.kept_start = true;
    out.factor = unpack_right(start.x, k, n);
    out.beta = free_beta ? start.x(k * n) : 0.0;
    out.warm.x = start.x;
  }
  return out;
}

StepOutput solve_left_step(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                           const DegradationState& state, double beta, const WarmStart* warm) {
  const Index m = pp.power.rows();
  const Index k = f.rank();
  const auto sub = left_subproblem(pp, f, hp, state, beta);

  WarmStart start = warm ? *warm : WarmStart{};
  start.x = project_onto_equalities(sub.eq_matrix, sub.eq_rhs, pack_left(f.left));
  Factorization trial = f;
  trial.left = unpack_left(start.x, m, k);

  StepOutput out;
  out.record.kind = StepKind::Left;
  out.record.start_objective = full_objective(pp, trial, hp, state);

  const auto res = convex_subsolve(sub, step_options(hp), &start);
  trial.left = unpack_left(res.x, m, k);
  out.record.end_objective = full_objective(pp, trial, hp, state);
  out.record.subsolver_iterations = res.iterations;
  out.record.certified = res.certified;
  out.warm = res.warm;
  out.beta = beta;
  if (out.record.end_objective <= out.record.start_objective) {
    out.factor = std::move(trial.left);
  } else {
    out.record.kept_start = true;
    out.factor = unpack_left(start.x, m, k);
    out.warm.x = start.x;
  }
  return out;
}

FitResult fit(const PowerMatrix& p, const HyperParams& hp, const Eigen::VectorXd& day_weights) {
  FitResult result;
  result.warnings = hp.validate();
  auto reject = [&](RejectReason reason, std::string detail) {
    result.reject_reason = reason;
    result.reject_detail = std::move(detail);
    result.converged = false;
    return result;
  };

  const Index m = p.rows();
  const Index n = p.cols();
  if (n < kMinFitDays) {
    return reject(RejectReason::TooShort, std::to_string(n) + " days of data, need " + std::to_string(kMinFitDays));
  }
  if (m < 3 || hp.k > std::min(m, n)) return reject(RejectReason::Degenerate, "rank exceeds matrix dimensions");
  if (p.mask.count() == 0 || !(robust_scale(p) > 0.0)) return reject(RejectReason::TooSparse, "no usable power observations");

  PreparedPower pp;
  try {
    pp = prepare_power(p, day_weights);
  } catch (const Error& e) {
    return reject(RejectReason::TooSparse, e.what());
  }
  const auto day_rows = std::count(pp.weights.active_rows.begin(), pp.weights.active_rows.end(), true);
  Index observed = 0;
  for (Index t = 0; t < m; ++t) {
    if (pp.weights.active_rows[static_cast<std::size_t>(t)]) observed += p.mask.row(t).count();
  }
  const double coverage = day_rows == 0 ? 0.0 : static_cast<double>(observed) / static_cast<double>(day_rows * n);
  if (coverage < kMinDaytimeCoverage) {
    return reject(RejectReason::TooSparse, "daytime coverage " + std::to_string(coverage) + " below 0.3");
  }
  result.scale = pp.scale;

  Factorization f = initialize(pp.power, hp.k, hp.tau);
  for (Index t = 0; t < m; ++t) {
    if (!pp.weights.active_rows[static_cast<std::size_t>(t)]) f.left.row(t).setZero();
  }
  DegradationState state{0.0, linear_daily_energy(f, p.delta_t)};
  double beta = 0.0;
  WarmStart warm_right, warm_left;
  bool have_right = false, have_left = false;

  try {
    for (int sweep = 1; sweep <= hp.max_iters; ++sweep) {
      auto right = solve_right_step(pp, f, hp, state, beta, have_right ? &warm_right : nullptr);
      f.right = std::move(right.factor);
      beta = right.beta;
      warm_right = std::move(right.warm);
      have_right = true;
      right.record.sweep = sweep;
      result.steps.push_back(right.record);

      auto left = solve_left_step(pp, f, hp, state, beta, have_left ? &warm_left : nullptr);
      f.left = std::move(left.factor);
      warm_left = std::move(left.warm);
      have_left = true;
      left.record.sweep = sweep;
      result.steps.push_back(left.record);

      result.iterations = sweep;
      const double obj = full_objective(pp, f, hp, state);
      const double stall = result.objective_trace.empty()
                               ? std::numeric_limits<double>::infinity()
                               : std::abs(result.objective_trace.back().objective - obj) / std::max(1.0, std::abs(obj));
      result.objective_trace.push_back({sweep, obj, beta});
      result.bootstrap_energy = state.d_prev;
      result.constrained_days = n > kYearLag ? constrained_days(state.d_prev, kDenominatorEps)
                                             : std::vector<Index>{};

      if (sweep >= 2 && std::abs(beta - state.beta) < hp.beta_tol && stall < kObjectiveStall) {
        result.converged = true;
        break;
      }
      state.d_prev = linear_daily_energy(f, p.delta_t);
      state.beta = beta;
    }
  } catch (const Error& e) {
    result.factorization = f;
    return reject(RejectReason::Degenerate, e.what());
  }

  f.left *= pp.scale;
  result.factorization = std::move(f);
  result.clear_sky = reconstruct(result.factorization);
  result.daily_energy = daily_energy(result.clear_sky, p.delta_t);
  result.linear_energy = linear_daily_energy(result.factorization, p.delta_t);
  result.bootstrap_energy *= pp.scale;
  result.beta = beta;
  result.beta_defined = !result.constrained_days.empty();
  if (!result.beta_defined) {
    return reject(RejectReason::TooShort, "no day pairs one year apart");
  }
  if (!result.converged) {
    return reject(RejectReason::NotConverged,
                  "beta did not settle within " + std::to_string(hp.max_iters) + " sweeps");
  }
  return result;
}

}  // namespace scsf
