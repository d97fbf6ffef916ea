#include "dmlboot/dgp.hpp"

#include <cmath>
#include <cstdio>

#include "dmlboot/rng.hpp"

namespace dmlboot {

namespace {

constexpr double kTruncation = 6.0;  // covariates are conditioned on |X_j| <= 6

double truncated_normal(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    const double z = gauss(rng);
    if (std::abs(z) <= kTruncation) return z;
  }
}

Eigen::VectorXd draw_coefficients(int dim, int active, double scale, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < active; ++j) coef[j] = gauss(rng) * scale;
  return coef;
}

}  // namespace

const char* to_string(DgpKind k) {
  switch (k) {
    case DgpKind::mean_only:
      return "mean_only";
    case DgpKind::plr_linear:
      return "plr_linear";
    case DgpKind::plr_sparse:
      return "plr_sparse";
  }
  return "unknown";
}

void DgpSpec::validate() const {
  if (!std::isfinite(theta0)) throw InvalidSpecError("theta0 must be finite");
  if (!(sigma_u >= 0.0) || !std::isfinite(sigma_u))
    throw InvalidSpecError("sigma_u must be a nonnegative real");
  if (!(sigma_v >= 0.0) || !std::isfinite(sigma_v))
    throw InvalidSpecError("sigma_v must be a nonnegative real");
  if (kind != DgpKind::mean_only && dim_x < 1)
    throw InvalidSpecError("plr models need dim_x >= 1");
  if (kind == DgpKind::plr_sparse && (sparsity < 1 || sparsity > dim_x))
    throw InvalidSpecError("plr_sparse needs 1 <= sparsity <= dim_x");
}

std::string DgpSpec::name() const {
  char buf[96];
  switch (kind) {
    case DgpKind::mean_only:
      return "mean_only";
    case DgpKind::plr_linear:
      std::snprintf(buf, sizeof buf, "plr_linear_p%d", dim_x);
      return buf;
    case DgpKind::plr_sparse:
      std::snprintf(buf, sizeof buf, "plr_sparse_p%d_s%d", dim_x, sparsity);
      return buf;
  }
  return "unknown";
}

GeneratedData generate(const DgpSpec& spec, int n) {
  spec.validate();
  if (n < 2) throw InvalidParamError("generate needs n >= 2");
  GeneratedData out;

  if (spec.kind == DgpKind::mean_only) {
    Rng rng = make_rng(derive_seed(spec.seed, 0xda7a));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd rows(n, 1);
    for (int i = 0; i < n; ++i)
      rows(i, 0) = spec.theta0 + spec.sigma_u * gauss(rng);
    ColumnSchema schema;
    schema.names = {"y"};
    schema.outcome = 0;
    out.data = std::make_shared<Dataset>(std::move(rows), std::move(schema));
    auto truth = std::make_shared<OracleFunctions>();
    const double theta0 = spec.theta0;
    truth->outcome = [theta0](const Eigen::Ref<const Eigen::VectorXd>&) {
      return theta0;
    };
    out.truth = std::move(truth);
    return out;
  }

  const int p = spec.dim_x;
  const int active = spec.kind == DgpKind::plr_sparse ? spec.sparsity : p;
  const double scale = 1.0 / std::sqrt(static_cast<double>(active));
  // Coefficients come from their own stream so that changing n never changes
  // the population functions belonging to a seed.
  Rng coef_rng = make_rng(derive_seed(spec.seed, 0xc0ef));
  const Eigen::VectorXd m0 = draw_coefficients(p, active, scale, coef_rng);
  const Eigen::VectorXd g0 = draw_coefficients(p, active, scale, coef_rng);

  Rng rng = make_rng(derive_seed(spec.seed, 0xda7a));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd rows(n, 2 + p);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x[j] = truncated_normal(rng);
    const double d = m0.dot(x) + spec.sigma_v * gauss(rng);
    const double y = spec.theta0 * d + g0.dot(x) + spec.sigma_u * gauss(rng);
    rows(i, 0) = y;
    rows(i, 1) = d;
    rows.row(i).segment(2, p) = x.transpose();
  }
  ColumnSchema schema;
  schema.names.resize(static_cast<std::size_t>(2 + p));
  schema.names[0] = "y";
  schema.names[1] = "d";
  for (int j = 0; j < p; ++j) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "x%d", j + 1);
    schema.names[static_cast<std::size_t>(2 + j)] = buf;
  }
  schema.outcome = 0;
  schema.treatment = 1;
  schema.covariates.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) schema.covariates[static_cast<std::size_t>(j)] = 2 + j;
  out.data = std::make_shared<Dataset>(std::move(rows), std::move(schema));

  auto truth = std::make_shared<OracleFunctions>();
  const double theta0 = spec.theta0;
  truth->treatment = [m0](const Eigen::Ref<const Eigen::VectorXd>& x) {
    return m0.dot(x);
  };
  // E[Y|X] = theta0 * m0(X) + g0(X): the treatment noise averages out.
  truth->outcome = [theta0, m0, g0](const Eigen::Ref<const Eigen::VectorXd>& x) {
    return theta0 * m0.dot(x) + g0.dot(x);
  };
  out.truth = std::move(truth);
  out.g0_coef = g0;
  out.m0_coef = m0;
  return out;
}

ScoreFunction mean_score() {
  ScoreFunction s;
  s.d_theta = 1;
  s.theta_lower = Eigen::VectorXd::Constant(1, -100.0);
  s.theta_upper = Eigen::VectorXd::Constant(1, 100.0);
  s.affine_in_theta = true;
  s.evaluate = [](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                  const ColumnSchema& schema,
                  const Eigen::Ref<const Eigen::VectorXd>& theta,
                  const NuisanceModel&) {
    Eigen::VectorXd v(1);
    v[0] = row[schema.outcome] - theta[0];
    return v;
  };
  s.jacobian = [](const Eigen::Ref<const Eigen::RowVectorXd>&,
                  const ColumnSchema&,
                  const Eigen::Ref<const Eigen::VectorXd>&,
                  const NuisanceModel&) {
    return Eigen::MatrixXd::Constant(1, 1, -1.0);
  };
  return s;
}

ScoreFunction plr_score() {
  ScoreFunction s;
  s.d_theta = 1;
  s.theta_lower = Eigen::VectorXd::Constant(1, -100.0);
  s.theta_upper = Eigen::VectorXd::Constant(1, 100.0);
  s.affine_in_theta = true;
  auto covariates_of = [](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                          const ColumnSchema& schema) {
    Eigen::VectorXd x(schema.covariates.size());
    for (std::size_t j = 0; j < schema.covariates.size(); ++j)
      x[static_cast<Eigen::Index>(j)] = row[schema.covariates[j]];
    return x;
  };
  s.evaluate = [covariates_of](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                               const ColumnSchema& schema,
                               const Eigen::Ref<const Eigen::VectorXd>& theta,
                               const NuisanceModel& eta) {
    if (!schema.has_treatment())
      throw UnknownRoleError("plr score needs a treatment column");
    const Eigen::VectorXd x = covariates_of(row, schema);
    const double v = row[schema.treatment] -
                     eta.predict(NuisanceRole::treatment_regression, x);
    const double resid = row[schema.outcome] -
                         eta.predict(NuisanceRole::outcome_regression, x) -
                         theta[0] * v;
    Eigen::VectorXd out(1);
    out[0] = resid * v;
    return out;
  };
  s.jacobian = [covariates_of](const Eigen::Ref<const Eigen::RowVectorXd>& row,
                               const ColumnSchema& schema,
                               const Eigen::Ref<const Eigen::VectorXd>&,
                               const NuisanceModel& eta) {
    if (!schema.has_treatment())
      throw UnknownRoleError("plr score needs a treatment column");
    const Eigen::VectorXd x = covariates_of(row, schema);
    const double v = row[schema.treatment] -
                     eta.predict(NuisanceRole::treatment_regression, x);
    return Eigen::MatrixXd::Constant(1, 1, -v * v);
  };
  return s;
}

ScoreFunction score_for(DgpKind kind) {
  return kind == DgpKind::mean_only ? mean_score() : plr_score();
}

double orthogonality_probe(const DgpSpec& spec, NuisanceRole direction,
                           int n_points, double r, std::uint64_t seed) {
  spec.validate();
  if (spec.kind == DgpKind::mean_only)
    throw InvalidSpecError("the orthogonality probe needs a plr model");
  if (n_points < 1) throw InvalidParamError("probe needs n_points >= 1");
  if (!(r > 0.0)) throw InvalidParamError("probe needs r > 0");

  const int p = spec.dim_x;
  const int active = spec.kind == DgpKind::plr_sparse ? spec.sparsity : p;
  const double scale = 1.0 / std::sqrt(static_cast<double>(active));
  Rng coef_rng = make_rng(derive_seed(spec.seed, 0xc0ef));
  const Eigen::VectorXd m0 = draw_coefficients(p, active, scale, coef_rng);
  const Eigen::VectorXd g0 = draw_coefficients(p, active, scale, coef_rng);
  (void)g0;  // the probe only needs residuals, which don't involve g0

  Rng rng = make_rng(derive_seed(seed, 0x9a7e));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double plus = 0.0, minus = 0.0;
  for (int i = 0; i < n_points; ++i) {
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x[j] = truncated_normal(rng);
    const double v = spec.sigma_v * gauss(rng);   // D - m0(X)
    const double u = spec.sigma_u * gauss(rng);   // Y - theta0*D - g0(X)
    const double delta = direction == NuisanceRole::outcome_regression
                             ? std::sin(x[0])
                             : std::cos(x[0]);
    if (direction == NuisanceRole::outcome_regression) {
      // Perturb l := l0 + t*delta: psi(t) = (u - t*delta) * v.
      plus += (u - r * delta) * v;
      minus += (u + r * delta) * v;
    } else {
      // Perturb m := m0 + t*delta: psi(t) = (u + theta0*t*delta)*(v - t*delta).
      plus += (u + spec.theta0 * r * delta) * (v - r * delta);
      minus += (u - spec.theta0 * r * delta) * (v + r * delta);
    }
  }
  plus /= n_points;
  minus /= n_points;
  return (plus - minus) / (2.0 * r);
}

}  // namespace dmlboot
