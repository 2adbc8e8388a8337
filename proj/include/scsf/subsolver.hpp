#pragma once

#include <optional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace scsf {

using SparseMatrix = Eigen::SparseMatrix<double>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// minimize   1/2 x'Qx + q'x + sum_j w_j * pinball_tau(b_j - c_j'x)
// subject to E x = e
//
// Q must be symmetric positive semidefinite (both triangles stored).
struct ConvexSubproblem {
  Eigen::Index num_vars = 0;
  SparseMatrix quad;
  Eigen::VectorXd linear;
  SparseRowMatrix pinball_rows;
  Eigen::VectorXd pinball_target;
  Eigen::VectorXd pinball_weight;
  double tau = 0.5;
  SparseRowMatrix eq_matrix;
  Eigen::VectorXd eq_rhs;

  // Fills empty members with conforming zero-sized/zero-valued defaults.
  static ConvexSubproblem with_vars(Eigen::Index n);

  double evaluate(const Eigen::VectorXd& x) const;
  double eq_residual(const Eigen::VectorXd& x) const;
  void check() const;
};

// Solution of a previous solve of the same shape: primal point and the
// multiplier of each pinball row.
struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd dual;
};

struct SubsolveResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;   // active-set polish produced the returned point
  bool certified = false;  // KKT conditions verified at the returned point
  bool converged = false;  // residual and gap tests met, or certified
  WarmStart warm;
};

struct SubsolveOptions {
  double tol = 1e-6;
  int max_iters = 200;
  bool polish = true;
  bool throw_on_stall = true;
};

// Primal-dual interior point with an active-set polish. Deterministic for
// identical inputs. Throws Infeasible when E x = e has no solution,
// MaxIterations when neither the residual test nor the optimality
// certificate is reached within the iteration budget (unless throw_on_stall is
// off, in which case the last iterate is returned with converged = false).
SubsolveResult convex_subsolve(const ConvexSubproblem& p, const SubsolveOptions& options = {},
                               const WarmStart* warm = nullptr);

inline SubsolveResult convex_subsolve(const ConvexSubproblem& p, double tol) {
  return convex_subsolve(p, SubsolveOptions{tol});
}

// Euclidean projection of x0 onto {x : E x = e}. Throws Infeasible.
Eigen::VectorXd project_onto_equalities(const SparseRowMatrix& eq, const Eigen::VectorXd& rhs,
                                        const Eigen::VectorXd& x0);

}  // namespace scsf
