#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

#include "dmlboot/core.hpp"

namespace dmlboot {

/// True conditional-mean functions, for plugging ground truth in as a
/// "learner" (oracle). Either function may be empty if the role is absent.
struct OracleFunctions {
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> outcome;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> treatment;
};

enum class LearnerKind { ridge, lasso, knn, oracle };

const char* to_string(LearnerKind k);

/// Which regression method estimates the nuisance functions, plus its
/// hyperparameters. One spec fits every role the data's schema declares.
struct LearnerSpec {
  LearnerKind kind = LearnerKind::ridge;
  /// Penalty for ridge/lasso under the objective
  ///   (1/(2N)) * ||y - X b||^2 + penalty(b),
  /// with covariates standardized internally. Negative means "auto":
  /// sd(y) * sqrt(2 log(max(p,2)) / N).
  double lambda = -1.0;
  int k = 5;  ///< neighbor count for knn
  std::shared_ptr<const OracleFunctions> truth;  ///< required for oracle

  static LearnerSpec ridge(double lambda = -1.0) {
    return {LearnerKind::ridge, lambda, 5, nullptr};
  }
  static LearnerSpec lasso(double lambda = -1.0) {
    return {LearnerKind::lasso, lambda, 5, nullptr};
  }
  static LearnerSpec knn(int k) { return {LearnerKind::knn, -1.0, k, nullptr}; }
  static LearnerSpec oracle(std::shared_ptr<const OracleFunctions> truth) {
    return {LearnerKind::oracle, -1.0, 5, std::move(truth)};
  }
};

/// Fit the learner on the given training rows, one predictor per role the
/// schema declares (outcome always; treatment when present). The returned
/// model is immutable and remembers its training rows so cross-fitting
/// discipline can be audited.
///
/// Throws EmptyTrainSetError for an empty training set, InvalidParamError for
/// bad hyperparameters (knn k > |train|, ridge with |train| < 2*dim), and
/// RankDeficiencyError when an unpenalized ridge meets a singular Gram matrix.
std::shared_ptr<const NuisanceModel> fit_nuisance(const LearnerSpec& spec,
                                                  const Dataset& data,
                                                  std::vector<int> train_idx);

}  // namespace dmlboot
