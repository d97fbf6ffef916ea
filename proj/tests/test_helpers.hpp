#pragma once

#include <Eigen/Core>
#include <vector>

#include "dmlboot/core.hpp"

namespace testutil {

/// Nuisance stand-in for scores that never consult eta.
class NullNuisance final : public dmlboot::NuisanceModel {
 public:
  double predict(dmlboot::NuisanceRole,
                 const Eigen::Ref<const Eigen::VectorXd>&) const override {
    throw dmlboot::UnknownRoleError("null nuisance has no predictors");
  }
  bool has_role(dmlboot::NuisanceRole) const override { return false; }
  const std::vector<int>& train_indices() const override {
    static const std::vector<int> empty;
    return empty;
  }
};

inline const dmlboot::NuisanceModel& null_eta() {
  static const NullNuisance eta;
  return eta;
}

/// Single-column dataset of outcomes.
inline dmlboot::Dataset make_y_dataset(const std::vector<double>& y) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(y.size()), 1);
  for (std::size_t i = 0; i < y.size(); ++i)
    rows(static_cast<Eigen::Index>(i), 0) = y[i];
  dmlboot::ColumnSchema schema;
  schema.names = {"y"};
  schema.outcome = 0;
  return dmlboot::Dataset(std::move(rows), std::move(schema));
}

/// Two-column dataset (outcome, treatment).
inline dmlboot::Dataset make_yd_dataset(const std::vector<double>& y,
                                        const std::vector<double>& d) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(y.size()), 2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    rows(static_cast<Eigen::Index>(i), 0) = y[i];
    rows(static_cast<Eigen::Index>(i), 1) = d[i];
  }
  dmlboot::ColumnSchema schema;
  schema.names = {"y", "d"};
  schema.outcome = 0;
  schema.treatment = 1;
  return dmlboot::Dataset(std::move(rows), std::move(schema));
}

/// Scalar score psi = y - theta on a y-only dataset (no nuisance use).
inline dmlboot::ScoreFunction simple_mean_score(double lo = -100.0,
                                                double hi = 100.0) {
  dmlboot::ScoreFunction s;
  s.d_theta = 1;
  s.theta_lower = Eigen::VectorXd::Constant(1, lo);
  s.theta_upper = Eigen::VectorXd::Constant(1, hi);
  s.affine_in_theta = true;
  s.evaluate = [](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                  const dmlboot::ColumnSchema& schema,
                  const Eigen::Ref<const Eigen::VectorXd>& theta,
                  const dmlboot::NuisanceModel&) {
    Eigen::VectorXd v(1);
    v[0] = row[schema.outcome] - theta[0];
    return v;
  };
  s.jacobian = [](const Eigen::Ref<const Eigen::RowVectorXd>&,
                  const dmlboot::ColumnSchema&,
                  const Eigen::Ref<const Eigen::VectorXd>&,
                  const dmlboot::NuisanceModel&) {
    return Eigen::MatrixXd::Constant(1, 1, -1.0);
  };
  return s;
}

/// Scalar score psi = (y - theta*d) * d: the no-covariate regression moment.
inline dmlboot::ScoreFunction regression_score(bool with_jacobian = true,
                                               bool affine = true) {
  dmlboot::ScoreFunction s;
  s.d_theta = 1;
  s.theta_lower = Eigen::VectorXd::Constant(1, -100.0);
  s.theta_upper = Eigen::VectorXd::Constant(1, 100.0);
  s.affine_in_theta = affine;
  s.evaluate = [](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                  const dmlboot::ColumnSchema& schema,
                  const Eigen::Ref<const Eigen::VectorXd>& theta,
                  const dmlboot::NuisanceModel&) {
    Eigen::VectorXd v(1);
    const double d = row[schema.treatment];
    v[0] = (row[schema.outcome] - theta[0] * d) * d;
    return v;
  };
  if (with_jacobian) {
    s.jacobian = [](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                    const dmlboot::ColumnSchema& schema,
                    const Eigen::Ref<const Eigen::VectorXd>&,
                    const dmlboot::NuisanceModel&) {
      const double d = row[schema.treatment];
      return Eigen::MatrixXd::Constant(1, 1, -d * d);
    };
  }
  return s;
}

}  // namespace testutil
