#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dmlboot/rng.hpp"
#include "dmlboot/weights.hpp"

using namespace dmlboot;

namespace {

bool is_integer_valued(const Eigen::VectorXd& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] != std::floor(w[i])) return false;
  return true;
}

}  // namespace

// --- basic draw contracts -----------------------------------------------------

TEST_CASE("every scheme draws nonnegative weights summing to n") {
  const std::vector<WeightScheme> schemes = {
      WeightScheme::efron(),         WeightScheme::bayesian(),
      WeightScheme::multiplier(0.5), WeightScheme::multiplier(4.0),
      WeightScheme::double_bootstrap(), WeightScheme::delete_h(0.5),
      WeightScheme::delete_h(0.8),   WeightScheme::unit()};
  for (const auto& scheme : schemes) {
    for (int n : {2, 10, 100}) {
      for (std::uint64_t seed : {1ull, 2ull, 99ull}) {
        const WeightVector wv = draw_weights(scheme, n, seed);
        REQUIRE(wv.w.size() == n);
        CHECK(wv.w.minCoeff() >= 0.0);
        CHECK(wv.w.sum() == doctest::Approx(n).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("draw_weights is a pure function of scheme, n, and seed") {
  for (const auto& scheme :
       {WeightScheme::efron(), WeightScheme::bayesian(),
        WeightScheme::double_bootstrap(), WeightScheme::delete_h(0.3)}) {
    const WeightVector a = draw_weights(scheme, 64, 12345);
    const WeightVector b = draw_weights(scheme, 64, 12345);
    CHECK(a.w == b.w);  // bitwise
    const WeightVector c = draw_weights(scheme, 64, 12346);
    CHECK(a.w != c.w);
  }
}

TEST_CASE("efron weights are nonnegative integer counts summing exactly to n") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightVector wv = draw_weights(WeightScheme::efron(), 3, seed);
    CHECK(is_integer_valued(wv.w));
    CHECK(wv.w.sum() == 3.0);  // exact in floating point
  }
}

TEST_CASE("double bootstrap weights are integer counts summing exactly to n") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightVector wv = draw_weights(WeightScheme::double_bootstrap(), 25, seed);
    CHECK(is_integer_valued(wv.w));
    CHECK(wv.w.sum() == 25.0);
  }
}

TEST_CASE("normalized multiplier weights are positive and sum to n") {
  const WeightVector wv = draw_weights(WeightScheme::multiplier(0.5), 100, 7);
  CHECK(wv.w.minCoeff() > 0.0);
  CHECK(wv.w.sum() == doctest::Approx(100.0).epsilon(1e-10));
}

TEST_CASE("delete-h at n=10 gamma=0.5 puts weight 2 on exactly five indices") {
  const WeightVector wv = draw_weights(WeightScheme::delete_h(0.5), 10, 42);
  int zeros = 0, twos = 0;
  for (int i = 0; i < 10; ++i) {
    if (wv.w[i] == 0.0) ++zeros;
    else if (wv.w[i] == 2.0) ++twos;
  }
  CHECK(zeros == 5);
  CHECK(twos == 5);
}

TEST_CASE("delete count rounds gamma*n and clamps to keep both sides nonempty") {
  CHECK(WeightScheme::delete_h(0.5).delete_count(10) == 5);
  CHECK(WeightScheme::delete_h(0.8).delete_count(10) == 8);
  CHECK(WeightScheme::delete_h(0.25).delete_count(10) == 3);  // round half up
  CHECK(WeightScheme::delete_h(0.01).delete_count(10) == 1);  // clamp low
  CHECK(WeightScheme::delete_h(0.99).delete_count(2) == 1);   // clamp high
}

TEST_CASE("unit scheme returns all ones") {
  const WeightVector wv = draw_weights(WeightScheme::unit(), 7, 3);
  for (int i = 0; i < 7; ++i) CHECK(wv.w[i] == 1.0);
}

TEST_CASE("scheme names are stable identifiers") {
  CHECK(WeightScheme::efron().name() == "efron");
  CHECK(WeightScheme::multiplier(0.5).name() == "multiplier_a0.5");
  CHECK(WeightScheme::bayesian().name() == "multiplier_a1");
  CHECK(WeightScheme::double_bootstrap().name() == "double");
  CHECK(WeightScheme::delete_h(0.8).name() == "delete_h_g0.8");
  CHECK(WeightScheme::unit().name() == "unit");
}

TEST_CASE("scheme validation rejects out-of-range parameters") {
  CHECK_THROWS_AS(WeightScheme::multiplier(0.0).validate(), InvalidParamError);
  CHECK_THROWS_AS(WeightScheme::multiplier(-1.0).validate(), InvalidParamError);
  CHECK_THROWS_AS(WeightScheme::delete_h(0.0).validate(), InvalidParamError);
  CHECK_THROWS_AS(WeightScheme::delete_h(1.0).validate(), InvalidParamError);
  CHECK_NOTHROW(WeightScheme::delete_h(0.5).validate());
  CHECK_THROWS_AS(draw_weights(WeightScheme::efron(), 0, 1), InvalidParamError);
  CHECK_THROWS_AS(draw_weights(WeightScheme::efron(), -5, 1), InvalidParamError);
}

// --- variance constants ---------------------------------------------------------

TEST_CASE("theoretical c2 constants match the scheme definitions") {
  CHECK(theoretical_c2(WeightScheme::efron()) == 1.0);
  CHECK(theoretical_c2(WeightScheme::bayesian()) == 1.0);
  CHECK(theoretical_c2(WeightScheme::multiplier(0.5)) == 2.0);
  CHECK(theoretical_c2(WeightScheme::multiplier(4.0)) == 0.25);
  CHECK(theoretical_c2(WeightScheme::double_bootstrap()) == 2.0);
  CHECK(theoretical_c2(WeightScheme::delete_h(0.5)) == 1.0);
  CHECK(theoretical_c2(WeightScheme::delete_h(0.8)) ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK(theoretical_c2(WeightScheme::unit()) == 1.0);  // reporting convention
}

TEST_CASE("estimate_c2 for delete-h is exact from a single draw") {
  // Every draw realizes n^{-1} sum (W_i - 1)^2 = h/(n-h) identically.
  CHECK(estimate_c2(WeightScheme::delete_h(0.5), 100, 1, 9) == 1.0);
  CHECK(estimate_c2(WeightScheme::delete_h(0.8), 100, 1, 9) ==
        doctest::Approx(80.0 / 20.0).epsilon(1e-15));
  CHECK(estimate_c2(WeightScheme::delete_h(0.5), 100, 50, 9) == 1.0);
}

TEST_CASE("estimate_c2 approaches each scheme's constant at moderate size") {
  const int n = 2000, reps = 500;
  const std::uint64_t seed = 20260816;
  CHECK(estimate_c2(WeightScheme::efron(), n, reps, seed) ==
        doctest::Approx(1.0).epsilon(0.05));
  CHECK(estimate_c2(WeightScheme::bayesian(), n, reps, seed) ==
        doctest::Approx(1.0).epsilon(0.05));
  CHECK(estimate_c2(WeightScheme::multiplier(4.0), n, reps, seed) ==
        doctest::Approx(0.25).epsilon(0.05));
  CHECK(estimate_c2(WeightScheme::double_bootstrap(), n, reps, seed) ==
        doctest::Approx(2.0).epsilon(0.05));
  CHECK(estimate_c2(WeightScheme::unit(), n, 10, seed) == 0.0);  // degenerate
}

TEST_CASE("estimate_c2 error shrinks at the Monte Carlo root-reps rate") {
  // Slope of log |error| against log reps for the Bayesian bootstrap, where
  // c^2 = 1 exactly. Averaged over independent replicates to tame noise.
  const int n = 500;
  const std::uint64_t seed = 31337;
  const std::vector<int> reps_grid = {100, 400, 1600, 6400};
  std::vector<double> log_err;
  for (std::size_t g = 0; g < reps_grid.size(); ++g) {
    double sq = 0.0;
    const int outer = 8;
    for (int o = 0; o < outer; ++o) {
      const double est = estimate_c2(WeightScheme::bayesian(), n, reps_grid[g],
                                     derive_seed(seed, g, o));
      sq += (est - 1.0) * (est - 1.0);
    }
    log_err.push_back(0.5 * std::log(sq / outer));
  }
  // Least-squares slope in log reps.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int G = static_cast<int>(reps_grid.size());
  for (int g = 0; g < G; ++g) {
    const double x = std::log(static_cast<double>(reps_grid[g]));
    sx += x; sy += log_err[g]; sxx += x * x; sxy += x * log_err[g];
  }
  const double slope = (G * sxy - sx * sy) / (G * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.4));
}

// --- a_n -----------------------------------------------------------------------

TEST_CASE("estimate_an is at least n^{-1/2} because the max weight is at least one") {
  for (const auto& scheme :
       {WeightScheme::efron(), WeightScheme::bayesian(),
        WeightScheme::double_bootstrap(), WeightScheme::delete_h(0.5)}) {
    for (int n : {10, 100}) {
      const double an = estimate_an(scheme, n, 50, 5);
      CHECK(an >= 1.0 / std::sqrt(static_cast<double>(n)) - 1e-12);
    }
  }
}

TEST_CASE("estimate_an for delete-h is the deterministic max over root n") {
  // max W = n/(n-h); at gamma = 0.5, n = 100: 2 / 10 = 0.2 exactly.
  CHECK(estimate_an(WeightScheme::delete_h(0.5), 100, 1, 3) == 0.2);
  CHECK(estimate_an(WeightScheme::delete_h(0.5), 100, 999, 77) == 0.2);
  CHECK(estimate_an(WeightScheme::unit(), 100, 1, 3) == 0.1);
}

// --- diagnostics -----------------------------------------------------------------

TEST_CASE("weight diagnostics report near-unit per-index means") {
  for (const auto& scheme :
       {WeightScheme::efron(), WeightScheme::bayesian(),
        WeightScheme::double_bootstrap(), WeightScheme::delete_h(0.5)}) {
    const WeightDiagnostics d = weight_diagnostics(scheme, 50, 4000, 11);
    REQUIRE(d.per_index_mean.size() == 50);
    for (int i = 0; i < 50; ++i)
      CHECK(d.per_index_mean[i] == doctest::Approx(1.0).epsilon(0.15));
    CHECK(d.min_weight >= 0.0);
    CHECK(d.max_sum_residual <= 1e-9);
    CHECK(d.c2_hat == doctest::Approx(theoretical_c2(scheme)).epsilon(0.25));
  }
}

TEST_CASE("delete-h diagnostics see only the two possible weight values") {
  const WeightDiagnostics d = weight_diagnostics(WeightScheme::delete_h(0.5), 10, 200, 4);
  CHECK(d.min_weight == 0.0);
  CHECK(d.max_weight == 2.0);
}

TEST_CASE("per-index means are exchangeable across positions") {
  // First and last index should look the same under any scheme: compare the
  // spread of per-index means to the Monte Carlo scale rather than position.
  const WeightDiagnostics d =
      weight_diagnostics(WeightScheme::efron(), 20, 8000, 123);
  const double lo = d.per_index_mean.minCoeff();
  const double hi = d.per_index_mean.maxCoeff();
  CHECK(hi - lo < 0.15);  // ~4 sd of mean of 8000 unit-variance draws is 0.045
}

// --- efron sampler identity -------------------------------------------------------

TEST_CASE("conditional binomial and index-count multinomial samplers agree in law") {
  // Chi-square goodness of fit of the count of index 0 against
  // Binomial(n, 1/n) at n = 5, for both samplers. With reps = 20000 and
  // 6 cells the 99.9% chi-square quantile (5 dof) is 20.5; use 25 as a
  // generous fixed bound for the frozen seeds.
  const int n = 5, reps = 20000;
  auto gof = [&](bool by_indices, std::uint64_t seed) {
    std::vector<int> counts(n + 1, 0);
    for (int r = 0; r < reps; ++r) {
      const std::uint64_t s = derive_seed(seed, r);
      const Eigen::VectorXd w = by_indices
          ? draw_efron_counts_by_indices(n, s)
          : draw_weights(WeightScheme::efron(), n, s).w;
      counts[static_cast<int>(w[0])]++;
    }
    // Binomial(5, 1/5) pmf.
    double chi2 = 0.0;
    for (int k = 0; k <= n; ++k) {
      double p = 1.0;
      for (int j = 0; j < k; ++j) p *= (n - j) / (1.0 * (j + 1)) ;
      p *= std::pow(1.0 / n, k) * std::pow(1.0 - 1.0 / n, n - k);
      const double expected = reps * p;
      chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    return chi2;
  };
  CHECK(gof(false, 2001) < 25.0);
  CHECK(gof(true, 2002) < 25.0);
}
