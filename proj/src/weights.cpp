#include "dmlboot/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "dmlboot/parallel.hpp"
#include "dmlboot/rng.hpp"

namespace dmlboot {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidParamError(msg);
}

/// Multinomial(total; p_1..p_n) counts by sequential conditional binomials:
/// W_i | W_1..W_{i-1} ~ Binomial(remaining, p_i / remaining_prob). O(n) time.
Eigen::VectorXd multinomial_counts(const Eigen::VectorXd& probs, int total,
                                   Rng& rng) {
  const int n = static_cast<int>(probs.size());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  int remaining = total;
  double remaining_prob = 1.0;
  for (int i = 0; i < n && remaining > 0; ++i) {
    if (i == n - 1) {
      counts[i] = remaining;
      remaining = 0;
      break;
    }
    double p = probs[i] / remaining_prob;
    p = std::min(1.0, std::max(0.0, p));
    int draw;
    if (p >= 1.0) {
      draw = remaining;
    } else if (p <= 0.0) {
      draw = 0;
    } else {
      std::binomial_distribution<int> bin(remaining, p);
      draw = bin(rng);
    }
    counts[i] = draw;
    remaining -= draw;
    remaining_prob -= probs[i];
    if (remaining_prob < 1e-300) remaining_prob = 1e-300;
  }
  return counts;
}

Eigen::VectorXd uniform_multinomial_counts(int n, Rng& rng) {
  // Specialized conditional-binomial recursion for p_i = 1/n: the conditional
  // success probability at step i is 1/(n - i), exactly representable logic
  // without accumulating remaining_prob error.
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  int remaining = n;
  for (int i = 0; i < n && remaining > 0; ++i) {
    if (i == n - 1) {
      counts[i] = remaining;
      break;
    }
    std::binomial_distribution<int> bin(remaining, 1.0 / (n - i));
    const int draw = bin(rng);
    counts[i] = draw;
    remaining -= draw;
  }
  return counts;
}

}  // namespace

int WeightScheme::delete_count(int n) const {
  int h = static_cast<int>(std::llround(gamma * n));
  h = std::max(1, std::min(n - 1, h));
  return h;
}

std::string WeightScheme::name() const {
  char buf[64];
  switch (kind) {
    case WeightKind::efron:
      return "efron";
    case WeightKind::normalized_multiplier:
      std::snprintf(buf, sizeof buf, "multiplier_a%g", alpha);
      return buf;
    case WeightKind::double_bootstrap:
      return "double";
    case WeightKind::delete_h:
      std::snprintf(buf, sizeof buf, "delete_h_g%g", gamma);
      return buf;
    case WeightKind::unit:
      return "unit";
  }
  return "unknown";
}

void WeightScheme::validate() const {
  if (kind == WeightKind::normalized_multiplier)
    require(alpha > 0.0 && std::isfinite(alpha),
            "normalized_multiplier requires alpha > 0");
  if (kind == WeightKind::delete_h)
    require(gamma > 0.0 && gamma < 1.0,
            "delete_h requires gamma in (0, 1)");
}

WeightVector draw_weights(const WeightScheme& scheme, int n,
                          std::uint64_t seed) {
  require(n >= 1, "draw_weights requires n >= 1");
  scheme.validate();
  Rng rng = make_rng(seed);
  Eigen::VectorXd w;
  switch (scheme.kind) {
    case WeightKind::efron:
      w = uniform_multinomial_counts(n, rng);
      break;
    case WeightKind::normalized_multiplier: {
      // Gamma(alpha, rate alpha): shape alpha, scale 1/alpha, mean 1.
      std::gamma_distribution<double> gam(scheme.alpha, 1.0 / scheme.alpha);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) y[i] = gam(rng);
      const double total = y.sum();
      require(total > 0.0, "normalized_multiplier drew an all-zero vector");
      w = y * (static_cast<double>(n) / total);
      break;
    }
    case WeightKind::double_bootstrap: {
      const Eigen::VectorXd m = uniform_multinomial_counts(n, rng);
      w = multinomial_counts(m / static_cast<double>(n), n, rng);
      break;
    }
    case WeightKind::delete_h: {
      const int h = scheme.delete_count(n);
      // Partial Fisher-Yates: the first h entries of a shuffled index array
      // form a uniform size-h subset; those indices get weight 0.
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = 0; i < h; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      const double factor = static_cast<double>(n) / (n - h);
      w = Eigen::VectorXd::Constant(n, factor);
      for (int i = 0; i < h; ++i) w[idx[i]] = 0.0;
      break;
    }
    case WeightKind::unit:
      w = Eigen::VectorXd::Ones(n);
      break;
  }
  return WeightVector{std::move(w), scheme, seed};
}

Eigen::VectorXd draw_efron_counts_by_indices(int n, std::uint64_t seed) {
  require(n >= 1, "draw_efron_counts_by_indices requires n >= 1");
  Rng rng = make_rng(seed);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int i = 0; i < n; ++i) counts[pick(rng)] += 1.0;
  return counts;
}

double theoretical_c2(const WeightScheme& scheme) {
  scheme.validate();
  switch (scheme.kind) {
    case WeightKind::efron:
      return 1.0;
    case WeightKind::normalized_multiplier:
      return 1.0 / scheme.alpha;
    case WeightKind::double_bootstrap:
      return 2.0;
    case WeightKind::delete_h:
      return scheme.gamma / (1.0 - scheme.gamma);
    case WeightKind::unit:
      // Degenerate diagnostic scheme: the true variance is 0; report 1 so
      // that c-corrected quantities remain finite (the draws are constant
      // anyway, so any positive constant gives the same scaled values).
      return 1.0;
  }
  return 1.0;
}

double estimate_c2(const WeightScheme& scheme, int n, int reps,
                   std::uint64_t seed, int workers) {
  require(n >= 1, "estimate_c2 requires n >= 1");
  require(reps >= 1, "estimate_c2 requires reps >= 1");
  scheme.validate();
  if (scheme.kind == WeightKind::delete_h) {
    // Every draw realizes exactly h/(n-h): (n-h) entries contribute
    // (n/(n-h) - 1)^2 = (h/(n-h))^2 and h entries contribute 1.
    const int h = scheme.delete_count(n);
    const double hh = static_cast<double>(h);
    return hh / (n - hh);
  }
  std::vector<double> vals(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), workers, [&](std::size_t r) {
    const WeightVector wv =
        draw_weights(scheme, n, derive_seed(seed, r, 0xc2c2));
    vals[r] = (wv.w.array() - 1.0).square().sum() / n;
  });
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / reps;
}

double estimate_an(const WeightScheme& scheme, int n, int reps,
                   std::uint64_t seed, int workers) {
  require(n >= 1, "estimate_an requires n >= 1");
  scheme.validate();
  const double root_n = std::sqrt(static_cast<double>(n));
  if (scheme.kind == WeightKind::delete_h) {
    // max_i W_i is the deterministic constant n/(n-h); no sampling needed.
    const int h = scheme.delete_count(n);
    return static_cast<double>(n) / (n - h) / root_n;
  }
  if (scheme.kind == WeightKind::unit) return 1.0 / root_n;
  require(reps >= 1, "estimate_an requires reps >= 1");
  std::vector<double> vals(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), workers, [&](std::size_t r) {
    const WeightVector wv =
        draw_weights(scheme, n, derive_seed(seed, r, 0xa11a));
    vals[r] = wv.w.maxCoeff();
  });
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / reps / root_n;
}

WeightDiagnostics weight_diagnostics(const WeightScheme& scheme, int n,
                                     int reps, std::uint64_t seed,
                                     int workers) {
  require(n >= 1, "weight_diagnostics requires n >= 1");
  require(reps >= 1, "weight_diagnostics requires reps >= 1");
  scheme.validate();
  WeightDiagnostics diag;
  diag.scheme = scheme;
  diag.n = n;
  diag.reps = reps;
  diag.tail_thresholds = {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0};

  struct Chunk {
    Eigen::VectorXd sum;
    double min_w = std::numeric_limits<double>::infinity();
    double max_w = -std::numeric_limits<double>::infinity();
    double max_resid = 0.0;
    double c2_acc = 0.0;
    std::vector<double> tail_counts;
  };
  // Replications are grouped into a fixed number of contiguous chunks that
  // does not depend on the worker count; each chunk accumulates its reps in
  // index order and chunks are reduced in index order, so every float sum has
  // a worker-independent evaluation order.
  const int nchunks = std::min(64, reps);
  std::vector<Chunk> chunks(static_cast<std::size_t>(nchunks));
  for (auto& c : chunks) {
    c.sum = Eigen::VectorXd::Zero(n);
    c.tail_counts.assign(diag.tail_thresholds.size(), 0.0);
  }
  parallel_for(static_cast<std::size_t>(nchunks), workers, [&](std::size_t ci) {
    Chunk& c = chunks[ci];
    const std::size_t lo = ci * static_cast<std::size_t>(reps) / nchunks;
    const std::size_t hi = (ci + 1) * static_cast<std::size_t>(reps) / nchunks;
    for (std::size_t r = lo; r < hi; ++r) {
      const WeightVector wv =
          draw_weights(scheme, n, derive_seed(seed, r, 0xd1a6));
      c.sum += wv.w;
      c.min_w = std::min(c.min_w, wv.w.minCoeff());
      c.max_w = std::max(c.max_w, wv.w.maxCoeff());
      c.max_resid = std::max(c.max_resid, std::abs(wv.w.sum() - n));
      c.c2_acc += (wv.w.array() - 1.0).square().sum() / n;
      for (std::size_t t = 0; t < diag.tail_thresholds.size(); ++t)
        c.tail_counts[t] += static_cast<double>(
            (wv.w.array() >= diag.tail_thresholds[t]).count());
    }
  });
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  diag.min_weight = std::numeric_limits<double>::infinity();
  diag.max_weight = -std::numeric_limits<double>::infinity();
  diag.tail_probs.assign(diag.tail_thresholds.size(), 0.0);
  double c2_acc = 0.0;
  for (const auto& c : chunks) {
    total += c.sum;
    diag.min_weight = std::min(diag.min_weight, c.min_w);
    diag.max_weight = std::max(diag.max_weight, c.max_w);
    diag.max_sum_residual = std::max(diag.max_sum_residual, c.max_resid);
    c2_acc += c.c2_acc;
    for (std::size_t t = 0; t < diag.tail_probs.size(); ++t)
      diag.tail_probs[t] += c.tail_counts[t];
  }
  diag.per_index_mean = total / static_cast<double>(reps);
  diag.c2_hat = c2_acc / reps;
  for (auto& p : diag.tail_probs) p /= static_cast<double>(reps) * n;
  return diag;
}

std::string WeightDiagnostics::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"scheme\":\"" << scheme.name() << "\",\"n\":" << n
     << ",\"reps\":" << reps << ",\"min_weight\":" << min_weight
     << ",\"max_weight\":" << max_weight
     << ",\"max_sum_residual\":" << max_sum_residual
     << ",\"c2_hat\":" << c2_hat << ",\"per_index_mean_range\":["
     << per_index_mean.minCoeff() << "," << per_index_mean.maxCoeff()
     << "],\"tail\":{";
  for (std::size_t t = 0; t < tail_thresholds.size(); ++t) {
    if (t) os << ",";
    os << "\"" << tail_thresholds[t] << "\":" << tail_probs[t];
  }
  os << "}}";
  return os.str();
}

}  // namespace dmlboot
