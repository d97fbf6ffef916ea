#pragma once

#include <Eigen/Core>
#include <vector>

#include "dmlboot/core.hpp"
#include "dmlboot/engine.hpp"

namespace dmlboot {

/// Plug-in sandwich pieces: J_hat, the raw score second moment, and
/// sigma2_hat = J_hat^{-1} * psi_outer_hat * J_hat^{-T} (symmetrized PSD).
struct AsymptoticEstimates {
  Eigen::MatrixXd jacobian_hat;
  Eigen::MatrixXd psi_outer_hat;  ///< (1/n) sum_i psi_i psi_i'
  Eigen::MatrixXd sigma2_hat;
};

/// Sandwich variance from explicit parts; scores are evaluated fold-wise at
/// (theta, the fold's nuisance). Throws SingularJacobianError when the
/// Jacobian's smallest singular value is below 1e-10.
AsymptoticEstimates sandwich_from_parts(
    const ScoreFunction& score, const Dataset& data,
    const FoldPartition& partition,
    const std::vector<std::shared_ptr<const NuisanceModel>>& nuisances,
    const Eigen::VectorXd& theta, const Eigen::MatrixXd& jacobian);

/// Sandwich variance of a fit, re-evaluated on `data` (normally the fit's own
/// sample; the partition and nuisances come from the fit).
AsymptoticEstimates estimate_sigma2(const DmlFit& fit, const Dataset& data);

enum class CiMethod { wald, percentile, basic, studentized };
enum class CMode { theoretical, realized };

const char* to_string(CiMethod m);
const char* to_string(CMode m);

/// Per-coordinate two-sided confidence interval.
struct ConfidenceInterval {
  CiMethod method = CiMethod::wald;
  double level = 0.95;
  Eigen::VectorXd lower, upper;
  double c_used = 1.0;  ///< weight-variance correction applied (1 for wald)
};

/// theta_hat +/- z_{(1+level)/2} * sqrt(diag(sigma2_hat) / n).
ConfidenceInterval wald_ci(const DmlFit& fit, double level);

/// Bootstrap interval from scaled draw deviations
///   s_b = (theta_star_b - theta_hat) / c,
/// where c^2 is the scheme constant (theoretical) or the mean of the draws'
/// realized values (realized). The c-scaling happens before any quantile is
/// taken. Quantiles use linear order-statistic interpolation.
///   percentile   theta_hat + [q_a(s), q_{1-a}(s)]
///   basic        theta_hat - [q_{1-a}(s), q_a(s)]
///   studentized  theta_hat + sd_hat * [q_a(s/sd_hat), q_{1-a}(s/sd_hat)],
///                sd_hat = sqrt(diag(sigma2_hat)); coincides with percentile
///                when sigma2_hat = I and c = 1.
/// Throws InsufficientDrawsError for B < 2 and warns on stderr for B < 50.
ConfidenceInterval bootstrap_ci(const BootstrapDistribution& dist, double level,
                                CiMethod method,
                                CMode c_mode = CMode::theoretical);

/// Kolmogorov-Smirnov distance between a sample and N(mean, sigma2).
double ks_distance(std::vector<double> sample, double mean, double sigma2);

/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Standard normal CDF and quantile (accurate to ~1e-14).
double normal_cdf(double z);
double normal_quantile(double p);

/// Linear-interpolation quantile of a sample (the common "type 7" rule):
/// with n sorted values, q(p) sits at rank 1 + (n-1)p, interpolated.
double quantile_linear(std::vector<double> values, double p);

}  // namespace dmlboot
