#pragma once

#include <Eigen/Core>
#include <vector>

#include "dmlboot/core.hpp"

namespace dmlboot {

enum class SolveMethod { gauss_newton, derivative_free, closed_form };

const char* to_string(SolveMethod m);

/// Outcome of one approximate moment solve on a fold.
struct SolveResult {
  Eigen::VectorXd theta;      ///< inside the score's box
  double achieved_norm = 0.0; ///< ||weighted fold moment|| at theta
  int iterations = 0;
  SolveMethod method_used = SolveMethod::gauss_newton;
  bool converged = false;     ///< norm <= epsilon or box-stationary point
};

/// Thrown when no iterate satisfied the acceptance test; carries the best
/// iterate found so callers can inspect how close the solve got.
struct NonConvergenceError : NumericalError {
  SolveResult best;
  NonConvergenceError(const std::string& msg, SolveResult b)
      : NumericalError(msg), best(std::move(b)) {}
};

/// Approximately solve the weighted empirical moment equation on a fold:
/// find theta in the box with ||(1/m) sum_{i in fold} w_i psi(X_i;theta,eta)||
/// at most epsilon_n, or a box-stationary point of the squared norm (which is
/// where the infimum over the box is attained up to solver tolerance).
///
/// Affine scores are solved in closed form (one Newton step is exact).
/// Otherwise damped Gauss-Newton runs first and, if it stalls or meets a
/// singular Jacobian and fallback is enabled, a derivative-free Nelder-Mead
/// polish of ||moment|| takes over. Throws DegenerateFoldError if all fold
/// weights are zero and NonConvergenceError if nothing acceptable was found.
SolveResult solve_moment(const ScoreFunction& score, const Dataset& data,
                         const std::vector<int>& fold, const NuisanceModel& eta,
                         const WeightVector* weights,
                         const Eigen::VectorXd& theta_init,
                         const SolverConfig& config);

/// Average Jacobian of the score over a fold at (theta, eta): the analytic
/// Jacobian averaged row by row when the score provides one, else a central
/// finite difference of the fold moment with step config.fd_step.
Eigen::MatrixXd estimate_jacobian(const ScoreFunction& score,
                                  const Dataset& data,
                                  const std::vector<int>& fold,
                                  const NuisanceModel& eta,
                                  const Eigen::VectorXd& theta,
                                  const SolverConfig& config);

}  // namespace dmlboot
