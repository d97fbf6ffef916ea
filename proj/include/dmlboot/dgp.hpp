#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "dmlboot/core.hpp"
#include "dmlboot/nuisance.hpp"

namespace dmlboot {

/// Synthetic data-generating processes used by the simulation studies.
///
///   mean_only    Y = theta0 + sigma_u * U; no treatment, no covariates.
///   plr_linear   X ~ N(0, I_p) truncated to [-6,6] coordinatewise,
///                D = m0(X) + sigma_v * V,  Y = theta0 * D + g0(X) + sigma_u * U,
///                with m0, g0 linear with dense coefficients of scale
///                1/sqrt(p) drawn once from the seed.
///   plr_sparse   Same, but only `sparsity` leading coefficients are nonzero
///                (scale 1/sqrt(sparsity)); dim_x may exceed n.
enum class DgpKind { mean_only, plr_linear, plr_sparse };

const char* to_string(DgpKind k);

struct DgpSpec {
  DgpKind kind = DgpKind::mean_only;
  double theta0 = 0.0;
  int dim_x = 1;      ///< covariate dimension (plr kinds)
  int sparsity = 1;   ///< active coefficients (plr_sparse)
  double sigma_u = 1.0;  ///< outcome noise sd, >= 0
  double sigma_v = 1.0;  ///< treatment noise sd, >= 0
  std::uint64_t seed = 1;

  void validate() const;  ///< throws InvalidSpecError
  std::string name() const;  ///< stable id for CSV, e.g. "plr_sparse_p50_s3"
};

/// A generated sample plus the true nuisance functions and the coefficient
/// vectors they use (both drawn deterministically from spec.seed).
struct GeneratedData {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const OracleFunctions> truth;
  Eigen::VectorXd g0_coef;  ///< outcome-side coefficients (empty for mean_only)
  Eigen::VectorXd m0_coef;  ///< treatment-side coefficients
};

GeneratedData generate(const DgpSpec& spec, int n);

/// Score for the mean model: psi(x; theta) = y - theta. Affine, with analytic
/// Jacobian -1. Nuisances are ignored.
ScoreFunction mean_score();

/// Orthogonalized partially linear score
///   psi(x; theta, eta) = (y - l(x) - theta*(d - m(x))) * (d - m(x)),
/// where l = E[Y|X] and m = E[D|X] come from the nuisance model. Affine in
/// theta with analytic Jacobian -(d - m(x))^2.
ScoreFunction plr_score();

/// The score matching a DGP kind.
ScoreFunction score_for(DgpKind kind);

/// Two-sided numerical Gateaux derivative of the population moment of
/// plr_score at the truth, in one nuisance direction (a bounded perturbation
/// sin/cos of the first covariate), estimated from n_points Monte Carlo
/// draws. Orthogonality of the score makes the exact derivative 0, so the
/// returned value is pure Monte Carlo noise of order 1/sqrt(n_points).
double orthogonality_probe(const DgpSpec& spec, NuisanceRole direction,
                           int n_points, double r, std::uint64_t seed);

}  // namespace dmlboot
