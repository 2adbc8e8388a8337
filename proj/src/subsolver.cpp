#include "scsf/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "scsf/error.hpp"

namespace scsf {

namespace {

using Eigen::ArrayXd;
using Eigen::Index;
using Eigen::VectorXd;

constexpr int kCorrectors = 2;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Quasi-definite saddle system
//   [ H + rp I   A'    ] [x]   [f]
//   [ A         -rd I  ] [y] = [g]
// factored once; solves are refined against rp = rd = 0.
class KktSystem {
 public:
  KktSystem(const SparseMatrix& h, const SparseRowMatrix& a, double reg_primal, double reg_dual)
      : h_(h), a_(a), n_(h.rows()), m_(a.rows()) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(h.nonZeros() + 2 * a.nonZeros() + n_ + m_));
    for (Index c = 0; c < h.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(h, c); it; ++it) {
        if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (Index i = 0; i < n_; ++i) trips.emplace_back(i, i, reg_primal);
    for (Index r = 0; r < a.outerSize(); ++r) {
      for (SparseRowMatrix::InnerIterator it(a, r); it; ++it) trips.emplace_back(n_ + r, it.col(), it.value());
    }
    for (Index i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -reg_dual);
    SparseMatrix k(n_ + m_, n_ + m_);
    k.setFromTriplets(trips.begin(), trips.end());
    ldlt_.compute(k);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }

  VectorXd solve(const VectorXd& rhs, int refine) const {
    VectorXd sol = ldlt_.solve(rhs);
    for (int r = 0; r < refine; ++r) {
      VectorXd res = rhs - apply_exact(sol);
      if (!res.allFinite()) break;
      sol += ldlt_.solve(res);
    }
    return sol;
  }

 private:
  VectorXd apply_exact(const VectorXd& sol) const {
    VectorXd out(n_ + m_);
    const auto x = sol.head(n_);
    const auto y = sol.tail(m_);
    out.head(n_) = h_ * x;
    if (m_ > 0) {
      out.head(n_) += a_.transpose() * y;
      out.tail(m_) = a_ * x;
    }
    return out;
  }

  const SparseMatrix& h_;
  const SparseRowMatrix& a_;
  Index n_;
  Index m_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool ok_ = false;
};

SparseRowMatrix stack_rows(const SparseRowMatrix& top, const SparseRowMatrix& bottom, Index cols) {
  SparseRowMatrix out(top.rows() + bottom.rows(), cols);
  out.reserve(top.nonZeros() + bottom.nonZeros());
  for (Index r = 0; r < top.rows(); ++r) {
    out.startVec(r);
    for (SparseRowMatrix::InnerIterator it(top, r); it; ++it) out.insertBack(r, it.col()) = it.value();
  }
  for (Index r = 0; r < bottom.rows(); ++r) {
    out.startVec(top.rows() + r);
    for (SparseRowMatrix::InnerIterator it(bottom, r); it; ++it) {
      out.insertBack(top.rows() + r, it.col()) = it.value();
    }
  }
  out.finalize();
  return out;
}

SparseRowMatrix select_rows(const SparseRowMatrix& m, const std::vector<Index>& rows) {
  SparseRowMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.startVec(static_cast<Index>(i));
    for (SparseRowMatrix::InnerIterator it(m, rows[i]); it; ++it) {
      out.insertBack(static_cast<Index>(i), it.col()) = it.value();
    }
  }
  out.finalize();
  return out;
}

struct PolishOutcome {
  VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
  bool certified = false;
};

// Fix the zero-residual rows found by the prox step as equalities and every
// other row at its current slope, solve the resulting equality QP, and verify
// the subgradient conditions of the original problem at the answer.
PolishOutcome polish(const ConvexSubproblem& p, const VectorXd& z) {
  const Index n = p.num_vars;
  const Index rows = p.pinball_rows.rows();
  const double tau = p.tau;
  std::vector<Index> active;
  VectorXd slope = VectorXd::Zero(rows);
  for (Index j = 0; j < rows; ++j) {
    const double r = p.pinball_target(j) - z(j);
    if (r == 0.0 && p.pinball_weight(j) > 0.0) {
      active.push_back(j);
    } else {
      slope(j) = r > 0.0 ? -tau * p.pinball_weight(j) : (1.0 - tau) * p.pinball_weight(j);
    }
  }
  if (static_cast<Index>(active.size()) + p.eq_matrix.rows() > n) return {};

  const SparseRowMatrix ca = select_rows(p.pinball_rows, active);
  const SparseRowMatrix a = stack_rows(ca, p.eq_matrix, n);
  VectorXd rhs(n + a.rows());
  rhs.head(n) = -(p.linear + p.pinball_rows.transpose() * slope);
  for (std::size_t i = 0; i < active.size(); ++i) rhs(n + static_cast<Index>(i)) = p.pinball_target(active[i]);
  rhs.tail(p.eq_matrix.rows()) = p.eq_rhs;

  const double scale = std::max(1.0, p.quad.nonZeros() > 0 ? p.quad.coeffs().cwiseAbs().maxCoeff() : 1.0);
  KktSystem kkt(p.quad, a, 1e-9 * scale, 1e-9 * scale);
  if (!kkt.ok()) return {};
  const VectorXd sol = kkt.solve(rhs, 8);
  if (!sol.allFinite()) return {};

  PolishOutcome out;
  out.x = sol.head(n);
  out.objective = p.evaluate(out.x);

  const VectorXd lambda = sol.segment(n, static_cast<Index>(active.size()));
  const VectorXd cx = p.pinball_rows * out.x;
  const double wmax = p.pinball_weight.size() ? p.pinball_weight.maxCoeff() : 1.0;
  const double bscale = 1.0 + inf_norm(p.pinball_target) + inf_norm(cx);
  const double lam_tol = 1e-7 * std::max(wmax, 1e-12);
  const double res_tol = 1e-9 * bscale;

  bool ok = true;
  for (std::size_t i = 0; i < active.size() && ok; ++i) {
    const Index j = active[i];
    const double w = p.pinball_weight(j);
    ok = lambda(static_cast<Index>(i)) >= -tau * w - lam_tol &&
         lambda(static_cast<Index>(i)) <= (1.0 - tau) * w + lam_tol &&
         std::abs(p.pinball_target(j) - cx(j)) <= res_tol;
  }
  for (Index j = 0; j < rows && ok; ++j) {
    if (slope(j) == 0.0) continue;
    const double r = p.pinball_target(j) - cx(j);
    ok = slope(j) < 0.0 ? r >= -res_tol : r <= res_tol;
  }
  if (ok && p.eq_matrix.rows() > 0) {
    ok = p.eq_residual(out.x) <= 1e-9 * (1.0 + inf_norm(p.eq_rhs));
  }
  if (ok) {
    // stationarity of the original problem with the recovered multipliers
    VectorXd grad = p.quad * out.x + p.linear + p.pinball_rows.transpose() * slope + ca.transpose() * lambda;
    if (p.eq_matrix.rows() > 0) grad += p.eq_matrix.transpose() * sol.tail(p.eq_matrix.rows());
    const double gscale = 1.0 + inf_norm(p.quad * out.x) + inf_norm(p.linear) + wmax;
    ok = inf_norm(grad) <= 1e-7 * gscale;
  }
  out.certified = ok;
  return out;
}

}  // namespace

ConvexSubproblem ConvexSubproblem::with_vars(Eigen::Index n) {
  ConvexSubproblem p;
  p.num_vars = n;
  p.quad = SparseMatrix(n, n);
  p.linear = VectorXd::Zero(n);
  p.pinball_rows = SparseRowMatrix(0, n);
  p.pinball_target = VectorXd(0);
  p.pinball_weight = VectorXd(0);
  p.eq_matrix = SparseRowMatrix(0, n);
  p.eq_rhs = VectorXd(0);
  return p;
}

double ConvexSubproblem::evaluate(const Eigen::VectorXd& x) const {
  double f = 0.5 * x.dot(quad * x) + linear.dot(x);
  if (pinball_rows.rows() > 0) {
    const VectorXd r = pinball_target - pinball_rows * x;
    for (Index j = 0; j < r.size(); ++j) {
      f += pinball_weight(j) * (r(j) >= 0.0 ? tau * r(j) : (tau - 1.0) * r(j));
    }
  }
  return f;
}

double ConvexSubproblem::eq_residual(const Eigen::VectorXd& x) const {
  if (eq_matrix.rows() == 0) return 0.0;
  return inf_norm(eq_matrix * x - eq_rhs);
}

void ConvexSubproblem::check() const {
  const auto n = num_vars;
  if (quad.rows() != n || quad.cols() != n || linear.size() != n || pinball_rows.cols() != n ||
      eq_matrix.cols() != n || pinball_target.size() != pinball_rows.rows() ||
      pinball_weight.size() != pinball_rows.rows() || eq_rhs.size() != eq_matrix.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "convex subproblem members do not conform");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::TauOutOfRange, "tau must lie in (0, 1)");
  if (pinball_rows.rows() > 0 && pinball_weight.minCoeff() < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "pinball weights must be nonnegative");
  }
  auto finite = [](const auto& m) {
    for (Index k = 0; k < m.outerSize(); ++k) {
      for (typename std::decay_t<decltype(m)>::InnerIterator it(m, k); it; ++it) {
        if (!std::isfinite(it.value())) return false;
      }
    }
    return true;
  };
  if (!finite(quad) || !finite(pinball_rows) || !finite(eq_matrix) || !linear.allFinite() ||
      !pinball_target.allFinite() || !pinball_weight.allFinite() || !eq_rhs.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "convex subproblem contains non-finite data");
  }
}

Eigen::VectorXd project_onto_equalities(const SparseRowMatrix& eq, const Eigen::VectorXd& rhs,
                                        const Eigen::VectorXd& x0) {
  if (eq.rows() == 0) return x0;
  const Index n = x0.size();
  SparseMatrix eye(n, n);
  eye.setIdentity();
  KktSystem kkt(eye, eq, 0.0, 1e-10);
  if (!kkt.ok()) throw Error(ErrorCode::Infeasible, "equality system could not be factored");
  VectorXd rhs_full(n + eq.rows());
  rhs_full.head(n) = x0;
  rhs_full.tail(eq.rows()) = rhs;
  VectorXd x = kkt.solve(rhs_full, 6).head(n);
  const double res = inf_norm(eq * x - rhs);
  if (!(res <= 1e-7 * (1.0 + inf_norm(rhs) + inf_norm(x)))) {
    throw Error(ErrorCode::Infeasible, "equality constraints are inconsistent (residual " +
                                           std::to_string(res) + ")");
  }
  return x;
}

namespace {

// Largest step in [0, 1] keeping v + alpha * dv >= 0 elementwise.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index j = 0; j < v.size(); ++j) {
    if (dv(j) < 0.0) alpha = std::min(alpha, -v(j) / dv(j));
  }
  return alpha;
}

// Saddle system of the interior-point Newton step
//   [ Q + C' diag(d) C + rp I   E'    ]
//   [ E                        -rd I  ]
// The sparsity pattern does not depend on d, so ordering and symbolic
// analysis are done once and each iteration only refactors numerically.
class NewtonSystem {
 public:
  NewtonSystem(const SparseMatrix& quad, const SparseRowMatrix& c, const SparseRowMatrix& eq, double reg)
      : quad_(quad), c_(c), eq_(eq), n_(quad.rows()), m_(eq.rows()) {
    std::vector<Eigen::Triplet<double>> trips;
    for (Index col = 0; col < quad.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(quad, col); it; ++it) {
        if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
      }
    }
    for (Index i = 0; i < n_; ++i) trips.emplace_back(i, i, reg);
    for (Index r = 0; r < c.rows(); ++r) {
      for (SparseRowMatrix::InnerIterator a(c, r); a; ++a) {
        for (SparseRowMatrix::InnerIterator b(c, r); b; ++b) {
          if (a.col() >= b.col()) trips.emplace_back(a.col(), b.col(), 0.0);
        }
      }
    }
    for (Index r = 0; r < eq.outerSize(); ++r) {
      for (SparseRowMatrix::InnerIterator it(eq, r); it; ++it) trips.emplace_back(n_ + r, it.col(), it.value());
    }
    for (Index i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -reg);
    kkt_ = SparseMatrix(n_ + m_, n_ + m_);
    kkt_.setFromTriplets(trips.begin(), trips.end());
    kkt_.makeCompressed();
    base_.assign(kkt_.valuePtr(), kkt_.valuePtr() + kkt_.nonZeros());

    auto position = [&](Index row, Index col) {
      const int* begin = kkt_.innerIndexPtr() + kkt_.outerIndexPtr()[col];
      const int* end = kkt_.innerIndexPtr() + kkt_.outerIndexPtr()[col + 1];
      return static_cast<int>(std::lower_bound(begin, end, static_cast<int>(row)) - kkt_.innerIndexPtr());
    };
    row_start_.reserve(static_cast<std::size_t>(c.rows()) + 1);
    row_start_.push_back(0);
    for (Index r = 0; r < c.rows(); ++r) {
      for (SparseRowMatrix::InnerIterator a(c, r); a; ++a) {
        for (SparseRowMatrix::InnerIterator b(c, r); b; ++b) {
          if (a.col() < b.col()) continue;
          pos_.push_back(position(a.col(), b.col()));
          coef_.push_back(a.value() * b.value());
        }
      }
      row_start_.push_back(pos_.size());
    }
    ldlt_.analyzePattern(kkt_);
  }

  bool factor(const VectorXd& d) {
    d_ = d;
    double* values = kkt_.valuePtr();
    std::copy(base_.begin(), base_.end(), values);
    for (Index r = 0; r < d.size(); ++r) {
      const double dr = d(r);
      for (std::size_t e = row_start_[static_cast<std::size_t>(r)]; e < row_start_[static_cast<std::size_t>(r) + 1]; ++e) {
        values[pos_[e]] += dr * coef_[e];
      }
    }
    ldlt_.factorize(kkt_);
    return ldlt_.info() == Eigen::Success;
  }

  // Solves against the unregularized system with iterative refinement.
  VectorXd solve(const VectorXd& rhs, int refine) const {
    VectorXd sol = ldlt_.solve(rhs);
    for (int r = 0; r < refine; ++r) {
      VectorXd res = rhs - apply(sol);
      if (!res.allFinite()) break;
      sol += ldlt_.solve(res);
    }
    return sol;
  }

 private:
  VectorXd apply(const VectorXd& sol) const {
    VectorXd out(n_ + m_);
    const auto x = sol.head(n_);
    out.head(n_) = quad_ * x + c_.transpose() * d_.cwiseProduct(c_ * x);
    if (m_ > 0) {
      out.head(n_) += eq_.transpose() * sol.tail(m_);
      out.tail(m_) = eq_ * x;
    }
    return out;
  }

  const SparseMatrix& quad_;
  const SparseRowMatrix& c_;
  const SparseRowMatrix& eq_;
  Index n_;
  Index m_;
  SparseMatrix kkt_;
  std::vector<double> base_;
  std::vector<std::size_t> row_start_;
  std::vector<int> pos_;
  std::vector<double> coef_;
  VectorXd d_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

// Primal-dual interior point on the split form
//   min 1/2 x'Qx + q'x + sum_j w_j (tau u_j + (1 - tau) v_j)
//   s.t. Cx + u - v = b,  Ex = e,  u, v >= 0
// with Mehrotra predictor-corrector steps. The dual variable y of the split
// rows lives in the box [-(1 - tau) w, tau w]; its distances to the two faces
// are the slacks paired with u and v.
struct InteriorPoint {
  const SparseMatrix& quad;
  const VectorXd& linear;
  const SparseRowMatrix& c;
  const VectorXd& b;
  const VectorXd& w;
  double tau;
  const SparseRowMatrix& eq;
  const VectorXd& e;

  VectorXd x, u, v, y, nu;
  int iterations = 0;
  bool met = false;

  double primal_objective() const {
    return 0.5 * x.dot(quad * x) + linear.dot(x) + tau * w.dot(u) + (1.0 - tau) * w.dot(v);
  }

  // A warm dual is pulled a fraction `margin` of the box width inside it;
  // without one the dual starts at the box centre.
  void run(const VectorXd& x0, const VectorXd* y0, double eps, double gap_tol, int max_iters) {
    const Index rows = c.rows();
    const SparseMatrix ct = c.transpose();
    x = x0;
    const VectorXd r0 = b - c * x;
    double shift = 0.1 * r0.cwiseAbs().mean() + 1e-4 * (1.0 + inf_norm(b));
    if (y0) {
      constexpr double margin = 0.05;
      y = y0->cwiseMax(-(1.0 - tau - margin) * w).cwiseMin((tau - margin) * w);
      shift *= 0.1;
    } else {
      y = 0.5 * (2.0 * tau - 1.0) * w;
    }
    u = r0.cwiseMax(0.0).array() + shift;
    v = (-r0).cwiseMax(0.0).array() + shift;
    nu = VectorXd::Zero(eq.rows());

    const double bscale = 1.0 + inf_norm(b);
    const double escale = 1.0 + inf_norm(e);
    const double wscale = inf_norm(SparseRowMatrix(c.cwiseAbs()).transpose() * w);
    const double hscale = std::max(1.0, quad.nonZeros() > 0 ? quad.coeffs().cwiseAbs().maxCoeff() : 1.0);

    NewtonSystem newton(quad, c, eq, 1e-12 * hscale);
    for (iterations = 0; iterations < max_iters; ++iterations) {
      const VectorXd su = tau * w - y;
      const VectorXd sv = (1.0 - tau) * w + y;
      const VectorXd qx = quad * x;
      VectorXd r_d = qx + linear - ct * y;
      if (eq.rows() > 0) r_d -= eq.transpose() * nu;
      const VectorXd r_p = c * x + u - v - b;
      const VectorXd r_e = eq.rows() > 0 ? VectorXd(eq * x - e) : VectorXd(0);
      const double gap = u.dot(su) + v.dot(sv);
      const double mu = gap / (2.0 * static_cast<double>(rows));
      const double dscale = 1.0 + std::max({inf_norm(qx), inf_norm(linear), wscale});
      if (inf_norm(r_d) <= eps * dscale && inf_norm(r_p) <= eps * bscale && inf_norm(r_e) <= eps * escale &&
          gap <= gap_tol * (1.0 + std::abs(primal_objective()))) {
        met = true;
        break;
      }

      const VectorXd dinv = ((u.array() / su.array()) + (v.array() / sv.array())).inverse();
      if (!newton.factor(dinv)) break;

      VectorXd dx, dy, du, dv, dnu;
      auto direction = [&](const VectorXd& xi_u, const VectorXd& xi_v) {
        const VectorXd g = -r_p.array() - xi_u.array() / su.array() + xi_v.array() / sv.array();
        VectorXd rhs(x.size() + eq.rows());
        rhs.head(x.size()) = -r_d + ct * dinv.cwiseProduct(g);
        rhs.tail(eq.rows()) = -r_e;
        const VectorXd sol = newton.solve(rhs, 1);
        dx = sol.head(x.size());
        dnu = -sol.tail(eq.rows());
        dy = dinv.cwiseProduct(g - c * dx);
        du = (xi_u.array() + u.array() * dy.array()) / su.array();
        dv = (xi_v.array() - v.array() * dy.array()) / sv.array();
      };
      auto step_limit = [&]() {
        return std::min({max_step(u, du), max_step(v, dv), max_step(su, -dy), max_step(sv, dy)});
      };

      direction(-u.cwiseProduct(su), -v.cwiseProduct(sv));
      const double a_aff = step_limit();
      const double mu_aff = ((u + a_aff * du).dot(su - a_aff * dy) + (v + a_aff * dv).dot(sv + a_aff * dy)) /
                            (2.0 * static_cast<double>(rows));
      const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
      const VectorXd xi_u = (sigma * mu - u.array() * su.array() + du.array() * dy.array()).matrix();
      const VectorXd xi_v = (sigma * mu - v.array() * sv.array() - dv.array() * dy.array()).matrix();
      direction(xi_u, xi_v);
      double reach = step_limit();

      // Centrality correctors: pull complementarity products at a trial step
      // back into [0.1, 10] times the target and keep the result only if the
      // admissible step grows.
      const double target = sigma * mu;
      for (int corr = 0; corr < kCorrectors && reach < 0.9 && dx.allFinite(); ++corr) {
        const double trial = std::min(1.0, reach + 0.2);
        auto pull = [&](const VectorXd& pu, const VectorXd& ps) {
          const ArrayXd prod = pu.array() * ps.array();
          return (prod.max(0.1 * target) - prod).min(10.0 * target - prod).max(-10.0 * target).matrix().eval();
        };
        const VectorXd cu = pull(u + trial * du, su - trial * dy);
        const VectorXd cv = pull(v + trial * dv, sv + trial * dy);
        const VectorXd keep_x = dx, keep_y = dy, keep_u = du, keep_v = dv, keep_nu = dnu;
        direction(xi_u + cu, xi_v + cv);
        const double grown = dx.allFinite() ? step_limit() : 0.0;
        if (grown < reach + 0.1 * 0.2) {
          dx = keep_x;
          dy = keep_y;
          du = keep_u;
          dv = keep_v;
          dnu = keep_nu;
          break;
        }
        reach = grown;
      }
      if (!dx.allFinite() || !dy.allFinite()) break;
      const double alpha = std::min(1.0, 0.995 * reach);
      x += alpha * dx;
      u += alpha * du;
      v += alpha * dv;
      y += alpha * dy;
      nu += alpha * dnu;
    }
  }

  // Rows whose residual is driven to zero: their split variables vanish while
  // the dual stays strictly inside its box.
  std::vector<bool> zero_residual_rows() const {
    const double bscale = 1.0 + inf_norm(b);
    std::vector<bool> out(static_cast<std::size_t>(c.rows()));
    for (Index j = 0; j < c.rows(); ++j) {
      const double slack = std::min(tau * w(j) - y(j), (1.0 - tau) * w(j) + y(j)) / w(j);
      out[static_cast<std::size_t>(j)] = (u(j) + v(j)) / bscale < slack;
    }
    return out;
  }
};

}  // namespace

SubsolveResult convex_subsolve(const ConvexSubproblem& p, const SubsolveOptions& options,
                               const WarmStart* warm) {
  p.check();
  const Index n = p.num_vars;
  const Index rows = p.pinball_rows.rows();

  VectorXd x = (warm && warm->x.size() == n) ? warm->x : VectorXd::Zero(n);
  x = project_onto_equalities(p.eq_matrix, p.eq_rhs, x);

  std::vector<Index> weighted;
  for (Index j = 0; j < rows; ++j) {
    if (p.pinball_weight(j) > 0.0) weighted.push_back(j);
  }

  SubsolveResult result;
  if (weighted.empty()) {
    // every residual sits on a slope-zero branch: an equality-constrained QP
    auto pol = polish(p, p.pinball_target + VectorXd::Ones(rows));
    if (pol.x.size() != n || !pol.certified) {
      throw Error(ErrorCode::MaxIterations, "equality-constrained quadratic has no finite minimizer");
    }
    result.x = pol.x;
    result.objective = pol.objective;
    result.polished = result.certified = result.converged = true;
    result.warm.x = pol.x;
    return result;
  }

  const bool all = static_cast<Index>(weighted.size()) == rows;
  const SparseRowMatrix c = all ? p.pinball_rows : select_rows(p.pinball_rows, weighted);
  VectorXd b(static_cast<Index>(weighted.size()));
  VectorXd w(b.size());
  for (std::size_t i = 0; i < weighted.size(); ++i) {
    b(static_cast<Index>(i)) = p.pinball_target(weighted[i]);
    w(static_cast<Index>(i)) = p.pinball_weight(weighted[i]);
  }

  VectorXd y0;
  if (warm && warm->dual.size() == rows) {
    y0.resize(b.size());
    for (std::size_t i = 0; i < weighted.size(); ++i) y0(static_cast<Index>(i)) = warm->dual(weighted[i]);
  }
  InteriorPoint ipm{p.quad, p.linear, c, b, w, p.tau, p.eq_matrix, p.eq_rhs, {}, {}, {}, {}, {}};
  const double eps = std::clamp(1e-2 * options.tol, 1e-12, 1e-4);
  ipm.run(x, y0.size() ? &y0 : nullptr, eps, options.tol, options.max_iters);

  result.iterations = ipm.iterations;
  result.x = ipm.x;
  result.objective = p.evaluate(ipm.x);

  if (options.polish) {
    VectorXd z = p.pinball_rows * ipm.x;
    const auto zero = ipm.zero_residual_rows();
    for (std::size_t i = 0; i < weighted.size(); ++i) {
      if (zero[i]) z(weighted[i]) = p.pinball_target(weighted[i]);
    }
    auto pol = polish(p, z);
    if (pol.x.size() == n && pol.certified) {
      result.x = std::move(pol.x);
      result.objective = pol.objective;
      result.polished = result.certified = true;
    }
  }
  result.converged = ipm.met || result.certified;
  if (!result.converged && options.throw_on_stall) {
    throw Error(ErrorCode::MaxIterations,
                "interior point did not reach tolerance in " + std::to_string(options.max_iters) + " iterations");
  }
  result.warm.x = result.x;
  result.warm.dual = VectorXd::Zero(rows);
  for (std::size_t i = 0; i < weighted.size(); ++i) result.warm.dual(weighted[i]) = ipm.y(static_cast<Index>(i));
  return result;
}


}  // namespace scsf
