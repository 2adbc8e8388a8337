#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "scsf/ingest.hpp"
#include "scsf/model.hpp"
#include "scsf/subsolver.hpp"

namespace scsf {

enum class RejectReason { TooShort, TooSparse, NotConverged, Degenerate };

std::string_view to_string(RejectReason reason) noexcept;

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double beta = 0.0;
};

enum class StepKind { Left, Right };

// One convex step. Objectives are the full model objective under the step's
// bootstrap state, evaluated at the feasible start and at the solver output.
struct StepRecord {
  int sweep = 0;
  StepKind kind = StepKind::Right;
  double start_objective = 0.0;
  double end_objective = 0.0;
  int subsolver_iterations = 0;
  bool certified = false;
  bool kept_start = false;  // solver output was worse than the start; start kept

  bool descended(double rel_tol) const {
    return end_objective <= start_objective + rel_tol * std::max(1.0, std::abs(start_objective));
  }
};

struct FitResult {
  Factorization factorization;       // kW units: left * right is power
  Eigen::MatrixXd clear_sky;         // clamped reconstruction, kW
  double beta = 0.0;                 // fractional change per year
  bool beta_defined = false;
  DailyEnergy daily_energy;          // clamped, kWh
  Eigen::VectorXd linear_energy;     // unclamped delta_t * 1'LR, kWh
  Eigen::VectorXd bootstrap_energy;  // denominator used in the final right step, kWh
  std::vector<Eigen::Index> constrained_days;
  int iterations = 0;
  std::vector<TraceEntry> objective_trace;
  std::vector<StepRecord> steps;
  bool converged = false;
  std::optional<RejectReason> reject_reason;
  std::string reject_detail;
  double scale = 1.0;
  std::vector<std::string> warnings;

  bool accepted() const { return converged && !reject_reason; }
};

// Scale-normalized copy of the data together with the loss weights.
struct PreparedPower {
  PowerMatrix power;
  LossWeights weights;
  double scale = 1.0;
};

// Divides by the robust scale; rows that never rise above 1% of it are
// dropped from the quantile loss. `day_weights` may be empty (all ones).
PreparedPower prepare_power(const PowerMatrix& p, const Eigen::VectorXd& day_weights);

// Masked entries filled with the row-wise tau-quantile, then truncated SVD.
Factorization initialize(const PowerMatrix& p, int k, double tau = 0.85);

struct StepOutput {
  Eigen::MatrixXd factor;
  double beta = 0.0;
  StepRecord record;
  WarmStart warm;
};

// Subproblem builders exposed for testing.
ConvexSubproblem right_subproblem(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                                  const DegradationState& state);
ConvexSubproblem left_subproblem(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                                 const DegradationState& state, double beta);

// Minimizes over (right, beta) with left fixed, subject to the yearly
// bootstrap-linearized energy constraint.
StepOutput solve_right_step(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                            const DegradationState& state, double beta, const WarmStart* warm = nullptr);

// Minimizes over left with right and beta fixed, subject to the same
// constraint written in left-variables.
StepOutput solve_left_step(const PreparedPower& pp, const Factorization& f, const HyperParams& hp,
                           const DegradationState& state, double beta, const WarmStart* warm = nullptr);

FitResult fit(const PowerMatrix& p, const HyperParams& hp, const Eigen::VectorXd& day_weights = {});

}  // namespace scsf
