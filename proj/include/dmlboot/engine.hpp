#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "dmlboot/core.hpp"
#include "dmlboot/nuisance.hpp"
#include "dmlboot/weights.hpp"

namespace dmlboot {

/// How bootstrap weights are allocated to folds.
///   full_sample  one length-n weight vector per draw, restricted to each
///                fold when its moment is re-solved;
///   within_fold  K independent length-m vectors per draw, one per fold,
///                each summing to the fold size m.
enum class ResampleMode { full_sample, within_fold };

const char* to_string(ResampleMode m);

/// One bootstrap replicate: per-fold weighted solutions and their average.
struct BootstrapDraw {
  Eigen::VectorXd theta_star;        ///< rowwise mean of fold_thetas_star
  Eigen::MatrixXd fold_thetas_star;  ///< d_theta x K
  std::uint64_t weight_seed = 0;     ///< reproduces this draw's weights
  double c2_realized = 0.0;          ///< n^{-1} sum_i (W_i - 1)^2 for the draw
  std::vector<int> degenerate_folds; ///< folds whose weights all vanished;
                                     ///< their theta_star falls back to the
                                     ///< base fit's fold solution
};

/// A batch of bootstrap draws sharing one base fit. The base fit's nuisance
/// models are reused by identity: nothing is ever refit inside a draw.
struct BootstrapDistribution {
  std::vector<BootstrapDraw> draws;
  WeightScheme scheme;
  ResampleMode mode = ResampleMode::full_sample;
  DmlFit base_fit;
};

/// Cross-fitted moment estimation:
///  1. split rows into K equal folds,
///  2. fit the learner on each fold's complement (nuisances frozen after),
///  3. solve the unit-weight fold moment for each fold,
///  4. average the fold solutions and attach plug-in Jacobian/variance.
/// The seed feeds the optional fold shuffle and is recorded for provenance;
/// with shuffle_folds=false the whole fit is deterministic.
DmlFit fit_dml(std::shared_ptr<const Dataset> data, const ScoreFunction& score,
               const LearnerSpec& learner, int K, const SolverConfig& config,
               std::uint64_t seed, int workers = 1, bool shuffle_folds = false);

/// Weighted re-solves of the fitted moment system: B draws of bootstrap
/// weights, each re-solving every fold at the frozen nuisances with warm
/// start at the base fold solution. `config` overrides the fit's solver
/// options when non-null. Draw b is a pure function of (fit, scheme, mode,
/// derive_seed(seed, b)), so results are identical for every worker count.
BootstrapDistribution bootstrap_dml(const DmlFit& fit,
                                    const WeightScheme& scheme, int B,
                                    ResampleMode mode, std::uint64_t seed,
                                    int workers = 1,
                                    const SolverConfig* config = nullptr);

/// Estimated influence function values: row i is
///   -jacobian_hat^{-1} psi(X_i; theta_hat, eta_{fold(i)}),
/// using the nuisance model of the fold containing row i.
Eigen::MatrixXd influence_values(const DmlFit& fit, const Dataset& data);

}  // namespace dmlboot
