#include "dmlboot/nuisance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace dmlboot {

namespace {

/// Standardized linear predictor: yhat = intercept + b' * ((x - mu) / sd).
struct LinearPredictor {
  Eigen::VectorXd mean_x, sd_x, beta;
  double intercept = 0.0;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (beta.size() == 0) return intercept;
    return intercept +
           beta.dot(((x - mean_x).array() / sd_x.array()).matrix());
  }
};

struct StandardizedDesign {
  Eigen::MatrixXd xs;  ///< N x p, columns centered and scaled
  Eigen::VectorXd mean_x, sd_x;
};

StandardizedDesign standardize(const Eigen::MatrixXd& x) {
  StandardizedDesign d;
  const Eigen::Index n = x.rows(), p = x.cols();
  d.mean_x = x.colwise().mean();
  d.xs = x.rowwise() - d.mean_x.transpose();
  d.sd_x = (d.xs.array().square().colwise().sum() / static_cast<double>(n))
               .sqrt();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (d.sd_x[j] <= 0.0) d.sd_x[j] = 1.0;  // constant column: leave centered
    d.xs.col(j) /= d.sd_x[j];
  }
  return d;
}

double auto_lambda(const Eigen::VectorXd& y, Eigen::Index p) {
  const double n = static_cast<double>(y.size());
  const double mean = y.mean();
  const double sd =
      std::sqrt((y.array() - mean).square().sum() / std::max(1.0, n));
  const double dim = static_cast<double>(std::max<Eigen::Index>(p, 2));
  return sd * std::sqrt(2.0 * std::log(dim) / n);
}

LinearPredictor fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          double lambda) {
  LinearPredictor f;
  f.intercept = y.mean();
  const Eigen::Index p = x.cols();
  if (p == 0) return f;
  const StandardizedDesign d = standardize(x);
  f.mean_x = d.mean_x;
  f.sd_x = d.sd_x;
  const double n = static_cast<double>(x.rows());
  const Eigen::VectorXd yc = y.array() - f.intercept;
  Eigen::MatrixXd gram = d.xs.transpose() * d.xs / n;
  const Eigen::VectorXd xty = d.xs.transpose() * yc / n;
  if (lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    lu.setThreshold(1e-10);
    if (lu.rank() < p)
      throw RankDeficiencyError(
          "unpenalized ridge met a rank-deficient Gram matrix");
    f.beta = lu.solve(xty);
  } else {
    gram.diagonal().array() += lambda;
    f.beta = Eigen::LLT<Eigen::MatrixXd>(gram).solve(xty);
  }
  return f;
}

/// Cyclic coordinate descent for
///   (1/(2N)) ||yc - Xs b||^2 + lambda * ||b||_1
/// on a standardized design (so each coordinate's curvature is exactly 1).
LinearPredictor fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          double lambda) {
  LinearPredictor f;
  f.intercept = y.mean();
  const Eigen::Index p = x.cols();
  if (p == 0) return f;
  const StandardizedDesign d = standardize(x);
  f.mean_x = d.mean_x;
  f.sd_x = d.sd_x;
  const double n = static_cast<double>(x.rows());
  const Eigen::VectorXd yc = y.array() - f.intercept;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = yc;  // yc - Xs*beta, maintained incrementally
  // Per-coordinate curvature (1/N) sum_i xs_ij^2; exactly 1 for columns that
  // were actually scaled, 0 for constant columns, which then stay at beta=0.
  Eigen::VectorXd curv(p);
  for (Eigen::Index j = 0; j < p; ++j)
    curv[j] = d.xs.col(j).squaredNorm() / n;
  const auto soft = [](double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
  };
  const int max_sweeps = 10000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (curv[j] <= 0.0) continue;
      const double old = beta[j];
      const double rho = d.xs.col(j).dot(resid) / n + curv[j] * old;
      const double updated = soft(rho, lambda) / curv[j];
      if (updated != old) {
        resid -= (updated - old) * d.xs.col(j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change < 1e-8) break;
  }
  f.beta = std::move(beta);
  return f;
}

/// k-nearest-neighbor mean in raw (unstandardized) Euclidean covariate
/// distance; ties broken by training-row order for determinism.
struct KnnPredictor {
  Eigen::MatrixXd train_x;  ///< rows are training covariate vectors
  Eigen::VectorXd train_y;
  int k = 1;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::Index n = train_x.rows();
    if (train_x.cols() == 0) return train_y.mean();
    std::vector<std::pair<double, Eigen::Index>> dist(
        static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      dist[static_cast<std::size_t>(i)] = {
          (train_x.row(i).transpose() - x).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double acc = 0.0;
    for (int j = 0; j < k; ++j)
      acc += train_y[dist[static_cast<std::size_t>(j)].second];
    return acc / k;
  }
};

class FittedModel final : public NuisanceModel {
 public:
  enum class Engine { linear, knn, oracle };

  double predict(NuisanceRole role,
                 const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    const int slot = role_slot(role);
    if (!fitted_[slot]) {
      throw UnknownRoleError(role == NuisanceRole::outcome_regression
                                 ? "model has no outcome regression"
                                 : "model has no treatment regression");
    }
    switch (engine_) {
      case Engine::linear:
        return linear_[slot].predict(x);
      case Engine::knn:
        return knn_[slot].predict(x);
      case Engine::oracle: {
        const auto& fn = (role == NuisanceRole::outcome_regression)
                             ? truth_->outcome
                             : truth_->treatment;
        return fn(x);
      }
    }
    throw UnknownRoleError("unreachable");
  }

  bool has_role(NuisanceRole role) const override {
    return fitted_[role_slot(role)];
  }

  const std::vector<int>& train_indices() const override { return train_idx_; }

  Engine engine_ = Engine::linear;
  LinearPredictor linear_[2];
  KnnPredictor knn_[2];
  std::shared_ptr<const OracleFunctions> truth_;
  bool fitted_[2] = {false, false};
  std::vector<int> train_idx_;

 private:
  static int role_slot(NuisanceRole role) {
    return role == NuisanceRole::outcome_regression ? 0 : 1;
  }
};

}  // namespace

const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::ridge:
      return "ridge";
    case LearnerKind::lasso:
      return "lasso";
    case LearnerKind::knn:
      return "knn";
    case LearnerKind::oracle:
      return "oracle";
  }
  return "unknown";
}

std::shared_ptr<const NuisanceModel> fit_nuisance(const LearnerSpec& spec,
                                                  const Dataset& data,
                                                  std::vector<int> train_idx) {
  if (train_idx.empty())
    throw EmptyTrainSetError("fit_nuisance got an empty training set");
  for (int i : train_idx)
    if (i < 0 || i >= data.n())
      throw InvalidParamError("training index outside the dataset");

  const auto& schema = data.schema();
  const Eigen::Index n_train = static_cast<Eigen::Index>(train_idx.size());
  const Eigen::Index p = static_cast<Eigen::Index>(schema.covariates.size());

  auto model = std::make_shared<FittedModel>();
  model->train_idx_ = train_idx;

  if (spec.kind == LearnerKind::oracle) {
    if (!spec.truth)
      throw InvalidSpecError("oracle learner needs truth functions");
    model->engine_ = FittedModel::Engine::oracle;
    model->truth_ = spec.truth;
    // A role is available exactly when its truth function is supplied; a
    // score that never consults the nuisance works with an empty truth.
    model->fitted_[0] = static_cast<bool>(spec.truth->outcome);
    model->fitted_[1] = schema.has_treatment() &&
                        static_cast<bool>(spec.truth->treatment);
    // Nothing is estimated, so nothing was "trained on".
    model->train_idx_.clear();
    return model;
  }

  if (spec.kind == LearnerKind::ridge && n_train < 2 * std::max<Eigen::Index>(p, 1))
    throw InvalidParamError("ridge needs at least 2*dim training rows");
  if (spec.kind == LearnerKind::knn && (spec.k < 1 || spec.k > n_train))
    throw InvalidParamError("knn needs 1 <= k <= |train|");

  // Gather the training block once.
  Eigen::MatrixXd x(n_train, p);
  Eigen::VectorXd y(n_train);
  Eigen::VectorXd d_col(n_train);
  for (Eigen::Index r = 0; r < n_train; ++r) {
    const int i = train_idx[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < p; ++j)
      x(r, j) = data.rows()(i, schema.covariates[static_cast<std::size_t>(j)]);
    y[r] = data.outcome(i);
    if (schema.has_treatment()) d_col[r] = data.treatment(i);
  }

  const auto fit_role = [&](const Eigen::VectorXd& response, int slot) {
    switch (spec.kind) {
      case LearnerKind::ridge: {
        const double lam =
            spec.lambda < 0.0 ? auto_lambda(response, p) : spec.lambda;
        model->engine_ = FittedModel::Engine::linear;
        model->linear_[slot] = fit_ridge(x, response, lam);
        break;
      }
      case LearnerKind::lasso: {
        const double lam =
            spec.lambda < 0.0 ? auto_lambda(response, p) : spec.lambda;
        model->engine_ = FittedModel::Engine::linear;
        model->linear_[slot] = fit_lasso(x, response, lam);
        break;
      }
      case LearnerKind::knn: {
        model->engine_ = FittedModel::Engine::knn;
        model->knn_[slot] = KnnPredictor{x, response, spec.k};
        break;
      }
      case LearnerKind::oracle:
        break;  // handled above
    }
    model->fitted_[slot] = true;
  };

  fit_role(y, 0);
  if (schema.has_treatment()) fit_role(d_col, 1);
  return model;
}

}  // namespace dmlboot
