#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dmlboot/errors.hpp"

namespace dmlboot {

/// Families of exchangeable bootstrap weights. Every scheme produces a
/// nonnegative exchangeable vector (W_1,...,W_n) with sum_i W_i = n and a
/// positive limiting variance constant c^2 = lim Var(W_1):
///
///   efron                  multinomial resampling counts, c^2 = 1
///   normalized_multiplier  W_i = Y_i / mean(Y), Y_i iid Gamma(alpha, alpha),
///                          c^2 = 1/alpha (alpha = 1 is the Bayesian bootstrap)
///   double_bootstrap       multinomial counts resampled from multinomial
///                          counts, c^2 = 2
///   delete_h               W_i = n/(n-h) on a uniform size-(n-h) subset and
///                          0 on the deleted h = round(gamma*n) indices,
///                          c^2 = gamma/(1-gamma)
///   unit                   all weights identically 1; a degenerate scheme
///                          used for diagnostics only (it violates the
///                          positive-variance requirement by design, and its
///                          c^2 is reported as 1 so that scaled draws stay
///                          finite).
enum class WeightKind {
  efron,
  normalized_multiplier,
  double_bootstrap,
  delete_h,
  unit,
};

struct WeightScheme {
  WeightKind kind = WeightKind::efron;
  double alpha = 1.0;  ///< Gamma shape/rate for normalized_multiplier; > 0.
  double gamma = 0.5;  ///< limiting deletion fraction for delete_h; in (0,1).

  static WeightScheme efron() { return {WeightKind::efron, 1.0, 0.5}; }
  static WeightScheme multiplier(double alpha) {
    return {WeightKind::normalized_multiplier, alpha, 0.5};
  }
  /// Bayesian bootstrap: normalized Exp(1) = Gamma(1,1) multipliers.
  static WeightScheme bayesian() { return multiplier(1.0); }
  static WeightScheme double_bootstrap() {
    return {WeightKind::double_bootstrap, 1.0, 0.5};
  }
  static WeightScheme delete_h(double gamma) {
    return {WeightKind::delete_h, 1.0, gamma};
  }
  static WeightScheme unit() { return {WeightKind::unit, 1.0, 0.5}; }

  /// Number of deleted indices at sample size n: round(gamma*n) clamped to
  /// [1, n-1] so that at least one index survives and at least one is dropped.
  int delete_count(int n) const;

  /// Stable identifier used in CSV/JSON output, e.g. "multiplier_a0.5".
  std::string name() const;

  /// Validate parameters; throws InvalidParamError.
  void validate() const;
};

/// One drawn weight vector together with its provenance.
struct WeightVector {
  Eigen::VectorXd w;    ///< nonnegative, sums to n (exactly for integer-valued
                        ///< schemes, to ~1e-12 relative otherwise)
  WeightScheme scheme;  ///< scheme that produced it
  std::uint64_t seed;   ///< seed that reproduces it via draw_weights
};

/// Draw one weight vector of length n. Pure function of (scheme, n, seed).
WeightVector draw_weights(const WeightScheme& scheme, int n, std::uint64_t seed);

/// Multinomial(n; 1/n,...,1/n) counts via the index-drawing representation:
/// draw n iid uniform indices and count occurrences. Distributionally
/// identical to the conditional-binomial sampler used by draw_weights for the
/// efron scheme; kept public so the identity can be tested.
Eigen::VectorXd draw_efron_counts_by_indices(int n, std::uint64_t seed);

/// Limiting variance constant c^2 of the scheme.
double theoretical_c2(const WeightScheme& scheme);

/// Monte Carlo estimate of c^2 at sample size n: the mean over `reps`
/// independent draws of n^{-1} sum_i (W_i - 1)^2. For delete_h every draw
/// realizes h/(n-h) exactly, so the estimate is exact for any reps >= 1.
double estimate_c2(const WeightScheme& scheme, int n, int reps,
                   std::uint64_t seed, int workers = 1);

/// Monte Carlo estimate of a_n = n^{-1/2} E[max_i W_i]. For delete_h the
/// maximum is the deterministic constant n/(n-h), so the exact value is
/// returned and `reps` is ignored.
double estimate_an(const WeightScheme& scheme, int n, int reps,
                   std::uint64_t seed, int workers = 1);

/// Summary statistics over repeated draws, for sanity-checking a scheme.
struct WeightDiagnostics {
  WeightScheme scheme;
  int n = 0;
  int reps = 0;
  Eigen::VectorXd per_index_mean;  ///< mean of W_i over reps (all ~ 1)
  double min_weight = 0.0;         ///< smallest weight seen
  double max_weight = 0.0;         ///< largest weight seen
  std::vector<double> tail_thresholds;  ///< t values for the tail table
  std::vector<double> tail_probs;       ///< pooled P(W >= t) estimates
  double max_sum_residual = 0.0;   ///< max over reps of |sum_i W_i - n|
  double c2_hat = 0.0;             ///< realized c^2 estimate over the reps

  std::string to_json() const;
};

WeightDiagnostics weight_diagnostics(const WeightScheme& scheme, int n,
                                     int reps, std::uint64_t seed,
                                     int workers = 1);

}  // namespace dmlboot
