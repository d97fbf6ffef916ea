#include "dmlboot/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>

namespace dmlboot {

namespace {

constexpr double kSingularTol = 1e-10;

Eigen::MatrixXd inverse_checked(const Eigen::MatrixXd& jac) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullU |
                                                 Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < kSingularTol)
    throw SingularJacobianError(
        "Jacobian is numerically singular (smallest singular value < 1e-10)");
  return svd.solve(Eigen::MatrixXd::Identity(jac.rows(), jac.cols()));
}

double resolve_c(const BootstrapDistribution& dist, CMode c_mode) {
  double c2;
  if (c_mode == CMode::theoretical) {
    c2 = theoretical_c2(dist.scheme);
  } else {
    double acc = 0.0;
    for (const auto& d : dist.draws) acc += d.c2_realized;
    c2 = acc / static_cast<double>(dist.draws.size());
  }
  if (!(c2 > 0.0))
    throw NumericalError("bootstrap c^2 is not positive; cannot scale draws");
  return std::sqrt(c2);
}

}  // namespace

const char* to_string(CiMethod m) {
  switch (m) {
    case CiMethod::wald:
      return "wald";
    case CiMethod::percentile:
      return "percentile";
    case CiMethod::basic:
      return "basic";
    case CiMethod::studentized:
      return "studentized";
  }
  return "unknown";
}

const char* to_string(CMode m) {
  return m == CMode::theoretical ? "theoretical" : "realized";
}

AsymptoticEstimates sandwich_from_parts(
    const ScoreFunction& score, const Dataset& data,
    const FoldPartition& partition,
    const std::vector<std::shared_ptr<const NuisanceModel>>& nuisances,
    const Eigen::VectorXd& theta, const Eigen::MatrixXd& jacobian) {
  score.validate();
  if (partition.n != data.n())
    throw DimensionMismatchError("partition does not match the dataset size");
  if (static_cast<int>(nuisances.size()) != partition.K)
    throw DimensionMismatchError("need one nuisance model per fold");
  const int d = score.d_theta;
  AsymptoticEstimates est;
  est.jacobian_hat = jacobian;
  est.psi_outer_hat = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < partition.K; ++k) {
    const NuisanceModel& eta = *nuisances[static_cast<std::size_t>(k)];
    for (int i : partition.fold(k)) {
      const Eigen::VectorXd psi =
          score.evaluate(data.rows().row(i), data.schema(), theta, eta);
      est.psi_outer_hat.noalias() += psi * psi.transpose();
    }
  }
  est.psi_outer_hat /= static_cast<double>(data.n());
  const Eigen::MatrixXd jinv = inverse_checked(jacobian);
  Eigen::MatrixXd sigma2 = jinv * est.psi_outer_hat * jinv.transpose();
  est.sigma2_hat = 0.5 * (sigma2 + sigma2.transpose());  // exact symmetry
  return est;
}

AsymptoticEstimates estimate_sigma2(const DmlFit& fit, const Dataset& data) {
  return sandwich_from_parts(fit.score, data, fit.partition, fit.nuisances,
                             fit.theta_hat, fit.jacobian_hat);
}

ConfidenceInterval wald_ci(const DmlFit& fit, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidParamError("confidence level must be inside (0, 1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const double n = static_cast<double>(fit.data->n());
  ConfidenceInterval ci;
  ci.method = CiMethod::wald;
  ci.level = level;
  ci.c_used = 1.0;
  const Eigen::VectorXd half =
      (fit.sigma2_hat.diagonal().array().max(0.0) / n).sqrt() * z;
  ci.lower = fit.theta_hat - half;
  ci.upper = fit.theta_hat + half;
  return ci;
}

ConfidenceInterval bootstrap_ci(const BootstrapDistribution& dist, double level,
                                CiMethod method, CMode c_mode) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidParamError("confidence level must be inside (0, 1)");
  if (method == CiMethod::wald)
    throw InvalidParamError("use wald_ci for the non-bootstrap interval");
  const int B = static_cast<int>(dist.draws.size());
  if (B < 2)
    throw InsufficientDrawsError("bootstrap_ci needs at least 2 draws");
  if (B < 50)
    std::cerr << "[dmlboot] warning: bootstrap_ci on only " << B
              << " draws; quantiles will be noisy\n";
  const double c = resolve_c(dist, c_mode);
  const Eigen::VectorXd& theta = dist.base_fit.theta_hat;
  const int d = static_cast<int>(theta.size());
  const double alpha = 0.5 * (1.0 - level);

  ConfidenceInterval ci;
  ci.method = method;
  ci.level = level;
  ci.c_used = c;
  ci.lower.resize(d);
  ci.upper.resize(d);
  std::vector<double> s(static_cast<std::size_t>(B));
  for (int j = 0; j < d; ++j) {
    for (int b = 0; b < B; ++b)
      s[static_cast<std::size_t>(b)] =
          (dist.draws[static_cast<std::size_t>(b)].theta_star[j] - theta[j]) / c;
    switch (method) {
      case CiMethod::percentile: {
        ci.lower[j] = theta[j] + quantile_linear(s, alpha);
        ci.upper[j] = theta[j] + quantile_linear(s, 1.0 - alpha);
        break;
      }
      case CiMethod::basic: {
        ci.lower[j] = theta[j] - quantile_linear(s, 1.0 - alpha);
        ci.upper[j] = theta[j] - quantile_linear(s, alpha);
        break;
      }
      case CiMethod::studentized: {
        const double sd =
            std::sqrt(std::max(0.0, dist.base_fit.sigma2_hat(j, j)));
        if (!(sd > 0.0))
          throw NumericalError(
              "studentized interval needs a positive variance estimate");
        std::vector<double> t(s);
        for (double& v : t) v /= sd;
        ci.lower[j] = theta[j] + sd * quantile_linear(t, alpha);
        ci.upper[j] = theta[j] + sd * quantile_linear(t, 1.0 - alpha);
        break;
      }
      case CiMethod::wald:
        break;  // rejected above
    }
  }
  return ci;
}

double ks_distance(std::vector<double> sample, double mean, double sigma2) {
  if (sample.empty()) throw InvalidParamError("ks_distance needs a sample");
  if (!(sigma2 >= 0.0))
    throw InvalidParamError("ks_distance needs sigma2 >= 0");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  const double sd = std::sqrt(sigma2);
  double dist = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    // Degenerate sigma2 = 0 reference: point mass at `mean`.
    const double f = sd > 0.0 ? normal_cdf((sample[i] - mean) / sd)
                              : (sample[i] < mean ? 0.0 : 1.0);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    dist = std::max(dist, std::max(f - lo, hi - f));
  }
  return dist;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw InvalidParamError("ks_distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dist = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    dist = std::max(dist, std::abs(static_cast<double>(i) / na -
                                   static_cast<double>(j) / nb));
  }
  return dist;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidParamError("normal_quantile needs p inside (0, 1)");
  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against the exact CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidParamError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidParamError("quantile needs p in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace dmlboot
