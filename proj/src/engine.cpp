#include "dmlboot/engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dmlboot/inference.hpp"
#include "dmlboot/parallel.hpp"
#include "dmlboot/rng.hpp"
#include "dmlboot/solver.hpp"

namespace dmlboot {

namespace {

constexpr double kSingularTol = 1e-10;

/// Per-row Jacobian: analytic if the score has one, else a central finite
/// difference of the single row's score (exact for affine scores).
Eigen::MatrixXd row_jacobian(const ScoreFunction& score,
                             const Eigen::Ref<const Eigen::RowVectorXd>& row,
                             const ColumnSchema& schema,
                             const Eigen::VectorXd& theta,
                             const NuisanceModel& eta, double fd_step) {
  const int d = score.d_theta;
  if (score.has_jacobian()) return score.jacobian(row, schema, theta, eta);
  Eigen::MatrixXd jac(d, d);
  Eigen::VectorXd probe = theta;
  for (int j = 0; j < d; ++j) {
    const double h = fd_step * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const Eigen::VectorXd up = score.evaluate(row, schema, probe, eta);
    probe[j] = theta[j] - h;
    const Eigen::VectorXd dn = score.evaluate(row, schema, probe, eta);
    probe[j] = theta[j];
    jac.col(j) = (up - dn) / (2.0 * h);
  }
  return jac;
}

/// Affine decomposition of a fold's scores around a reference theta:
/// psi_i(theta) = A_i * theta + b_i, stored flattened so the weighted fold
/// moment is two mat-vec products per draw.
struct AffineFoldCache {
  Eigen::MatrixXd a_flat;  ///< (d*d) x m, column r = vec(A_i) for fold row r
  Eigen::MatrixXd b;       ///< d x m
};

AffineFoldCache build_affine_cache(const ScoreFunction& score,
                                   const Dataset& data,
                                   const std::vector<int>& fold,
                                   const NuisanceModel& eta,
                                   const Eigen::VectorXd& theta_ref,
                                   double fd_step) {
  const int d = score.d_theta;
  const int m = static_cast<int>(fold.size());
  AffineFoldCache cache;
  cache.a_flat.resize(d * d, m);
  cache.b.resize(d, m);
  for (int r = 0; r < m; ++r) {
    const int i = fold[static_cast<std::size_t>(r)];
    const auto row = data.rows().row(i);
    const Eigen::MatrixXd a =
        row_jacobian(score, row, data.schema(), theta_ref, eta, fd_step);
    const Eigen::VectorXd psi_ref =
        score.evaluate(row, data.schema(), theta_ref, eta);
    cache.a_flat.col(r) =
        Eigen::Map<const Eigen::VectorXd>(a.data(), d * d);
    cache.b.col(r) = psi_ref - a * theta_ref;
  }
  return cache;
}

}  // namespace

const char* to_string(ResampleMode m) {
  return m == ResampleMode::full_sample ? "full_sample" : "within_fold";
}

DmlFit fit_dml(std::shared_ptr<const Dataset> data, const ScoreFunction& score,
               const LearnerSpec& learner, int K, const SolverConfig& config,
               std::uint64_t seed, int workers, bool shuffle_folds) {
  if (!data) throw InvalidParamError("fit_dml needs a dataset");
  score.validate();
  config.validate();
  const int n = data->n();
  const int d = score.d_theta;

  DmlFit fit;
  fit.data = data;
  fit.score = score;
  fit.config = config;
  fit.config.epsilon_n = config.resolve_epsilon(n);
  fit.partition =
      shuffle_folds ? make_folds_shuffled(n, K, seed) : make_folds(n, K);
  fit.seed = seed;

  fit.nuisances.resize(static_cast<std::size_t>(K));
  parallel_for(static_cast<std::size_t>(K), workers, [&](std::size_t k) {
    fit.nuisances[k] = fit_nuisance(
        learner, *data, fit.partition.complement(static_cast<int>(k)));
  });

  fit.fold_thetas.resize(d, K);
  fit.achieved_norms.resize(K);
  const Eigen::VectorXd init = score.box_midpoint();
  parallel_for(static_cast<std::size_t>(K), workers, [&](std::size_t k) {
    const SolveResult res = solve_moment(
        score, *data, fit.partition.fold(static_cast<int>(k)),
        *fit.nuisances[k], nullptr, init, fit.config);
    fit.fold_thetas.col(static_cast<Eigen::Index>(k)) = res.theta;
    fit.achieved_norms[static_cast<Eigen::Index>(k)] = res.achieved_norm;
  });
  fit.theta_hat = fit.fold_thetas.rowwise().mean();

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < K; ++k)
    jac += estimate_jacobian(score, *data, fit.partition.fold(k),
                             *fit.nuisances[static_cast<std::size_t>(k)],
                             fit.fold_thetas.col(k), fit.config);
  fit.jacobian_hat = jac / static_cast<double>(K);

  fit.sigma2_hat =
      sandwich_from_parts(score, *data, fit.partition, fit.nuisances,
                          fit.theta_hat, fit.jacobian_hat)
          .sigma2_hat;
  return fit;
}

BootstrapDistribution bootstrap_dml(const DmlFit& fit,
                                    const WeightScheme& scheme, int B,
                                    ResampleMode mode, std::uint64_t seed,
                                    int workers, const SolverConfig* config) {
  if (B < 1) throw InvalidParamError("bootstrap_dml needs B >= 1");
  scheme.validate();
  const Dataset& data = *fit.data;
  const ScoreFunction& score = fit.score;
  const SolverConfig cfg = config ? *config : fit.config;
  cfg.validate();
  const FoldPartition& part = fit.partition;
  const int n = part.n;
  const int K = part.K;
  const int m = part.m;
  const int d = score.d_theta;
  const double eps = cfg.resolve_epsilon(n);

  // The nuisances and fold solutions are frozen; precompute each fold's
  // affine score decomposition once so a draw costs two mat-vecs per fold.
  std::vector<AffineFoldCache> caches;
  if (score.affine_in_theta) {
    caches.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k)
      caches.push_back(build_affine_cache(
          score, data, part.fold(k), *fit.nuisances[static_cast<std::size_t>(k)],
          fit.fold_thetas.col(k), cfg.fd_step));
  }

  BootstrapDistribution dist;
  dist.scheme = scheme;
  dist.mode = mode;
  dist.base_fit = fit;
  dist.draws.resize(static_cast<std::size_t>(B));

  parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t b) {
    const std::uint64_t wseed = derive_seed(seed, b, 0xb007);
    BootstrapDraw draw;
    draw.weight_seed = wseed;
    draw.fold_thetas_star.resize(d, K);

    // Assemble the full-length weight vector for this draw.
    WeightVector wv;
    if (mode == ResampleMode::full_sample) {
      wv = draw_weights(scheme, n, wseed);
    } else {
      wv.scheme = scheme;
      wv.seed = wseed;
      wv.w.resize(n);
      for (int k = 0; k < K; ++k) {
        const WeightVector wk =
            draw_weights(scheme, m, derive_seed(wseed, k, 0xf01d));
        const auto& fold = part.fold(k);
        for (int r = 0; r < m; ++r)
          wv.w[fold[static_cast<std::size_t>(r)]] = wk.w[r];
      }
    }
    draw.c2_realized = (wv.w.array() - 1.0).square().sum() / n;

    Eigen::VectorXd w_fold(m);
    for (int k = 0; k < K; ++k) {
      const auto& fold = part.fold(k);
      for (int r = 0; r < m; ++r)
        w_fold[r] = wv.w[fold[static_cast<std::size_t>(r)]];

      if (w_fold.cwiseAbs().sum() == 0.0) {
        // Degenerate draw on this fold: keep the base solution and flag it.
        draw.fold_thetas_star.col(k) = fit.fold_thetas.col(k);
        draw.degenerate_folds.push_back(k);
        continue;
      }

      bool solved = false;
      if (score.affine_in_theta) {
        const AffineFoldCache& cache = caches[static_cast<std::size_t>(k)];
        Eigen::MatrixXd abar(d, d);
        Eigen::Map<Eigen::VectorXd>(abar.data(), d * d).noalias() =
            cache.a_flat * w_fold / static_cast<double>(m);
        const Eigen::VectorXd bbar = cache.b * w_fold / static_cast<double>(m);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(abar, Eigen::ComputeFullU |
                                                        Eigen::ComputeFullV);
        if (svd.singularValues().minCoeff() >= kSingularTol) {
          const Eigen::VectorXd root = svd.solve(-bbar);
          const Eigen::VectorXd proj = score.project(root);
          const double achieved = (abar * proj + bbar).norm();
          if ((proj - root).norm() == 0.0 || achieved <= eps) {
            draw.fold_thetas_star.col(k) = proj;
            solved = true;
          }
        }
      }
      if (!solved) {
        // General path: warm-started iterative solve at the frozen nuisance.
        const SolveResult res =
            solve_moment(score, data, fold,
                         *fit.nuisances[static_cast<std::size_t>(k)], &wv,
                         fit.fold_thetas.col(k), cfg);
        draw.fold_thetas_star.col(k) = res.theta;
      }
    }
    draw.theta_star = draw.fold_thetas_star.rowwise().mean();
    dist.draws[b] = std::move(draw);
  });
  return dist;
}

Eigen::MatrixXd influence_values(const DmlFit& fit, const Dataset& data) {
  if (data.n() != fit.partition.n)
    throw DimensionMismatchError(
        "influence_values needs data matching the fit's partition");
  const int d = fit.score.d_theta;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      fit.jacobian_hat, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < kSingularTol)
    throw SingularJacobianError("influence_values met a singular Jacobian");
  const Eigen::MatrixXd jinv =
      svd.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd out(data.n(), d);
  for (int k = 0; k < fit.partition.K; ++k) {
    const NuisanceModel& eta = *fit.nuisances[static_cast<std::size_t>(k)];
    for (int i : fit.partition.fold(k)) {
      const Eigen::VectorXd psi = fit.score.evaluate(
          data.rows().row(i), data.schema(), fit.theta_hat, eta);
      out.row(i) = (-jinv * psi).transpose();
    }
  }
  return out;
}

}  // namespace dmlboot
