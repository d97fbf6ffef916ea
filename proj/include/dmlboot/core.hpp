#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmlboot/errors.hpp"
#include "dmlboot/weights.hpp"

namespace dmlboot {

// --- data ------------------------------------------------------------------

/// Declares which columns of a dataset play which role.
struct ColumnSchema {
  std::vector<std::string> names;  ///< one per column
  int outcome = -1;                ///< required
  int treatment = -1;              ///< -1 if the model has no treatment
  std::vector<int> covariates;     ///< may be empty

  int width() const { return static_cast<int>(names.size()); }
  bool has_treatment() const { return treatment >= 0; }
  void validate() const;  ///< throws InvalidSpecError on bad indices
};

/// Immutable rectangular sample: n rows of iid observations with a schema.
/// All values must be finite and n >= 2.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd rows, ColumnSchema schema);

  int n() const { return static_cast<int>(rows_.rows()); }
  int width() const { return static_cast<int>(rows_.cols()); }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const ColumnSchema& schema() const { return schema_; }

  double outcome(int i) const { return rows_(i, schema_.outcome); }
  double treatment(int i) const;
  /// Covariate vector of row i (copies; covariate columns need not be
  /// contiguous).
  Eigen::VectorXd covariates(int i) const;

 private:
  Eigen::MatrixXd rows_;
  ColumnSchema schema_;
};

// --- folds -------------------------------------------------------------------

/// Partition of {0,...,n-1} into K disjoint folds of equal size m = n/K.
struct FoldPartition {
  int n = 0;
  int K = 0;
  int m = 0;                             ///< fold size n/K
  std::vector<std::vector<int>> folds;   ///< folds[k] sorted ascending

  const std::vector<int>& fold(int k) const { return folds.at(k); }
  /// Row indices outside fold k (the nuisance training set for fold k).
  std::vector<int> complement(int k) const;
  /// Fold containing row i.
  int fold_of(int i) const;
};

/// Deterministic contiguous partition: fold k contains rows
/// [k*m, (k+1)*m). Throws InvalidKError if K < 2 and DivisibilityError if K
/// does not divide n.
FoldPartition make_folds(int n, int K);

/// Randomized variant for robustness checks: rows are shuffled by the seed
/// before being cut into contiguous blocks. Same size/disjointness contract.
FoldPartition make_folds_shuffled(int n, int K, std::uint64_t seed);

// --- nuisance interface ------------------------------------------------------

/// Which conditional-mean function a nuisance model is asked for.
enum class NuisanceRole {
  outcome_regression,    ///< E[Y | X]
  treatment_regression,  ///< E[D | X]
};

/// A frozen nuisance estimate: per-role predictors fit on a training set.
/// Implementations are deterministic (same input -> bitwise same prediction)
/// and never mutate after construction, so a fit can be shared by every
/// bootstrap draw without refitting.
class NuisanceModel {
 public:
  virtual ~NuisanceModel() = default;
  /// Predict the role's conditional mean at covariate vector x.
  /// Throws UnknownRoleError if the role was not fit.
  virtual double predict(NuisanceRole role,
                         const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual bool has_role(NuisanceRole role) const = 0;
  /// Rows the model was trained on (empty for externally supplied truths).
  virtual const std::vector<int>& train_indices() const = 0;
};

// --- score -------------------------------------------------------------------

/// A moment/score function psi(x; theta, eta) in R^{d_theta}, with theta
/// restricted to a closed box. `evaluate` receives one data row plus the
/// schema so it can pick out outcome/treatment/covariates itself.
struct ScoreFunction {
  using Evaluate = std::function<Eigen::VectorXd(
      const Eigen::Ref<const Eigen::RowVectorXd>& row, const ColumnSchema& schema,
      const Eigen::Ref<const Eigen::VectorXd>& theta, const NuisanceModel& eta)>;
  using Jacobian = std::function<Eigen::MatrixXd(
      const Eigen::Ref<const Eigen::RowVectorXd>& row, const ColumnSchema& schema,
      const Eigen::Ref<const Eigen::VectorXd>& theta, const NuisanceModel& eta)>;

  int d_theta = 1;
  Eigen::VectorXd theta_lower;  ///< box lower bounds, size d_theta
  Eigen::VectorXd theta_upper;  ///< box upper bounds, size d_theta
  Evaluate evaluate;
  Jacobian jacobian;            ///< optional analytic d psi / d theta^T
  /// True if psi is affine in theta for every (x, eta); enables exact
  /// one-step solving of the weighted moment equation.
  bool affine_in_theta = false;

  bool has_jacobian() const { return static_cast<bool>(jacobian); }
  Eigen::VectorXd box_midpoint() const {
    return 0.5 * (theta_lower + theta_upper);
  }
  Eigen::VectorXd project(Eigen::VectorXd theta) const {
    return theta.cwiseMax(theta_lower).cwiseMin(theta_upper);
  }
  void validate() const;  ///< throws InvalidSpecError
};

// --- solver configuration ----------------------------------------------------

/// Options for the per-fold moment solves.
struct SolverConfig {
  /// Acceptance slack for the empirical moment norm. Negative means "auto":
  /// resolved to n^{-3/4} for the full sample size n at fit time.
  double epsilon_n = -1.0;
  int max_iters = 100;      ///< iteration cap per solve
  double fd_step = 1e-6;    ///< central finite-difference step for Jacobians
  bool fallback_enabled = true;  ///< allow derivative-free fallback

  double resolve_epsilon(int n) const;
  void validate() const;  ///< throws InvalidParamError
};

// --- fitted object -------------------------------------------------------------

/// Result of a cross-fitted moment estimation: per-fold solutions, their
/// average, the frozen per-fold nuisances, and plug-in sandwich pieces.
struct DmlFit {
  std::shared_ptr<const Dataset> data;
  ScoreFunction score;
  SolverConfig config;  ///< with epsilon_n resolved
  FoldPartition partition;
  std::vector<std::shared_ptr<const NuisanceModel>> nuisances;  ///< size K
  Eigen::MatrixXd fold_thetas;   ///< d_theta x K
  Eigen::VectorXd theta_hat;     ///< rowwise mean of fold_thetas
  Eigen::MatrixXd jacobian_hat;  ///< average per-fold Jacobian at the solutions
  Eigen::MatrixXd sigma2_hat;    ///< sandwich variance estimate (symmetric PSD)
  Eigen::VectorXd achieved_norms;  ///< per-fold moment norms at the solutions
  std::uint64_t seed = 0;
};

// --- operations ----------------------------------------------------------------

/// Weighted empirical moment over a fold:
///   (1/|fold|) * sum_{i in fold} w_i * psi(X_i; theta, eta).
/// `weights` has length n and defaults to all ones; `fold` defaults to all
/// rows. Linear in the weights by construction.
Eigen::VectorXd check_moment(const ScoreFunction& score, const Dataset& data,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const NuisanceModel& eta,
                             const WeightVector* weights = nullptr,
                             const std::vector<int>* fold = nullptr);

}  // namespace dmlboot
