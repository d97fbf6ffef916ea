#include "dmlboot/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dmlboot {

namespace {

constexpr double kStationaryTol = 1e-10;  // projected-gradient acceptance
constexpr double kSingularTol = 1e-10;    // smallest-singular-value cutoff

/// Weighted fold moment; thin wrapper so the solver has one evaluation point.
Eigen::VectorXd fold_moment(const ScoreFunction& score, const Dataset& data,
                            const std::vector<int>& fold,
                            const NuisanceModel& eta,
                            const WeightVector* weights,
                            const Eigen::VectorXd& theta) {
  Eigen::VectorXd g = check_moment(score, data, theta, eta, weights, &fold);
  if (!g.allFinite())
    throw NumericalError("fold moment evaluated to a non-finite value");
  return g;
}

/// Weighted average Jacobian over the fold: analytic row average if the score
/// provides one, else a central finite difference of the fold moment.
Eigen::MatrixXd fold_jacobian(const ScoreFunction& score, const Dataset& data,
                              const std::vector<int>& fold,
                              const NuisanceModel& eta,
                              const WeightVector* weights,
                              const Eigen::VectorXd& theta, double fd_step) {
  const int d = score.d_theta;
  if (score.has_jacobian()) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (int i : fold) {
      const double w = weights ? weights->w[i] : 1.0;
      if (w == 0.0) continue;
      acc += w * score.jacobian(data.rows().row(i), data.schema(), theta, eta);
    }
    return acc / static_cast<double>(fold.size());
  }
  Eigen::MatrixXd jac(d, d);
  Eigen::VectorXd probe = theta;
  for (int j = 0; j < d; ++j) {
    const double h = fd_step * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const Eigen::VectorXd up = fold_moment(score, data, fold, eta, weights, probe);
    probe[j] = theta[j] - h;
    const Eigen::VectorXd dn = fold_moment(score, data, fold, eta, weights, probe);
    probe[j] = theta[j];
    jac.col(j) = (up - dn) / (2.0 * h);
  }
  return jac;
}

double smallest_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

struct Best {
  Eigen::VectorXd theta;
  double norm = std::numeric_limits<double>::infinity();
  void offer(const Eigen::VectorXd& th, double n) {
    if (n < norm) {
      norm = n;
      theta = th;
    }
  }
};

/// Nelder-Mead on h(theta) = ||fold moment(project(theta))||. Returns the
/// number of function evaluations spent; updates `best` as it goes.
int nelder_mead(const std::function<double(const Eigen::VectorXd&)>& h,
                const ScoreFunction& score, const Eigen::VectorXd& start,
                int budget, Best& best) {
  const int d = score.d_theta;
  const int nv = d + 1;
  std::vector<Eigen::VectorXd> verts(static_cast<std::size_t>(nv));
  std::vector<double> fv(static_cast<std::size_t>(nv));
  verts[0] = score.project(start);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd v = verts[0];
    const double span = score.theta_upper[j] - score.theta_lower[j];
    double step = std::min(1.0, 0.05 * span);
    if (step <= 0.0) step = 1e-4;
    v[j] += (v[j] + step <= score.theta_upper[j]) ? step : -step;
    verts[static_cast<std::size_t>(j + 1)] = v;
  }
  int evals = 0;
  for (int i = 0; i < nv; ++i) {
    fv[static_cast<std::size_t>(i)] = h(verts[static_cast<std::size_t>(i)]);
    ++evals;
    best.offer(score.project(verts[static_cast<std::size_t>(i)]),
               fv[static_cast<std::size_t>(i)]);
  }
  auto order = [&]() {
    std::vector<int> idx(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return fv[static_cast<std::size_t>(a)] < fv[static_cast<std::size_t>(b)]; });
    std::vector<Eigen::VectorXd> nv2(static_cast<std::size_t>(nv));
    std::vector<double> nf2(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) {
      nv2[static_cast<std::size_t>(i)] = verts[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      nf2[static_cast<std::size_t>(i)] = fv[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    verts.swap(nv2);
    fv.swap(nf2);
  };
  while (evals < budget) {
    order();
    if (fv[static_cast<std::size_t>(nv - 1)] - fv[0] < 1e-15) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < d; ++i) centroid += verts[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(d);
    const Eigen::VectorXd& worst = verts[static_cast<std::size_t>(nv - 1)];
    auto eval = [&](const Eigen::VectorXd& v) {
      ++evals;
      const double f = h(v);
      best.offer(score.project(v), f);
      return f;
    };
    const Eigen::VectorXd refl = centroid + (centroid - worst);
    const double f_refl = eval(refl);
    if (f_refl < fv[0]) {
      const Eigen::VectorXd expd = centroid + 2.0 * (centroid - worst);
      const double f_expd = eval(expd);
      if (f_expd < f_refl) {
        verts[static_cast<std::size_t>(nv - 1)] = expd;
        fv[static_cast<std::size_t>(nv - 1)] = f_expd;
      } else {
        verts[static_cast<std::size_t>(nv - 1)] = refl;
        fv[static_cast<std::size_t>(nv - 1)] = f_refl;
      }
    } else if (f_refl < fv[static_cast<std::size_t>(nv - 2)]) {
      verts[static_cast<std::size_t>(nv - 1)] = refl;
      fv[static_cast<std::size_t>(nv - 1)] = f_refl;
    } else {
      const Eigen::VectorXd contr = centroid + 0.5 * (worst - centroid);
      const double f_contr = eval(contr);
      if (f_contr < fv[static_cast<std::size_t>(nv - 1)]) {
        verts[static_cast<std::size_t>(nv - 1)] = contr;
        fv[static_cast<std::size_t>(nv - 1)] = f_contr;
      } else {
        for (int i = 1; i < nv; ++i) {
          verts[static_cast<std::size_t>(i)] =
              verts[0] + 0.5 * (verts[static_cast<std::size_t>(i)] - verts[0]);
          fv[static_cast<std::size_t>(i)] = eval(verts[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
  return evals;
}

}  // namespace

const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::gauss_newton:
      return "gauss_newton";
    case SolveMethod::derivative_free:
      return "derivative_free";
    case SolveMethod::closed_form:
      return "closed_form";
  }
  return "unknown";
}

SolveResult solve_moment(const ScoreFunction& score, const Dataset& data,
                         const std::vector<int>& fold, const NuisanceModel& eta,
                         const WeightVector* weights,
                         const Eigen::VectorXd& theta_init,
                         const SolverConfig& config) {
  score.validate();
  config.validate();
  if (fold.empty()) throw InvalidParamError("solve_moment got an empty fold");
  if (theta_init.size() != score.d_theta)
    throw DimensionMismatchError("theta_init length does not match score");
  if (weights) {
    if (weights->w.size() != data.n())
      throw DimensionMismatchError("weight vector length does not match data");
    double fold_sum = 0.0;
    for (int i : fold) fold_sum += std::abs(weights->w[i]);
    if (fold_sum == 0.0)
      throw DegenerateFoldError("all bootstrap weights vanish on this fold");
  }
  const double eps = config.resolve_epsilon(data.n());

  auto g_of = [&](const Eigen::VectorXd& th) {
    return fold_moment(score, data, fold, eta, weights, th);
  };
  auto jac_of = [&](const Eigen::VectorXd& th) {
    return fold_jacobian(score, data, fold, eta, weights, th, config.fd_step);
  };

  Eigen::VectorXd theta = score.project(theta_init);
  Eigen::VectorXd g = g_of(theta);
  double norm = g.norm();
  Best best;
  best.offer(theta, norm);
  int iterations = 0;

  // Exact one-step path for affine scores: the Jacobian is constant in theta,
  // so a single Newton step lands on the unconstrained root.
  if (score.affine_in_theta) {
    const Eigen::MatrixXd jac = jac_of(theta);
    if (smallest_singular_value(jac) >= kSingularTol) {
      const Eigen::VectorXd step = jac.fullPivLu().solve(-g);
      const Eigen::VectorXd cand = score.project(theta + step);
      const Eigen::VectorXd g_cand = g_of(cand);
      const double n_cand = g_cand.norm();
      best.offer(cand, n_cand);
      const bool clipped = (cand - (theta + step)).norm() > 0.0;
      if (n_cand <= eps || !clipped) {
        // Unclipped affine Newton is exact up to rounding; a clipped step that
        // still meets the tolerance is equally acceptable.
        return SolveResult{cand, n_cand, 1, SolveMethod::closed_form,
                           true};
      }
      // Clipped and above tolerance: the minimum sits on the boundary; let
      // projected Gauss-Newton polish from the projected point.
      theta = cand;
      g = g_cand;
      norm = n_cand;
      iterations = 1;
    }
  }

  bool needs_fallback = false;
  bool stationary = false;
  for (; iterations < config.max_iters; ++iterations) {
    if (norm <= eps) break;
    const Eigen::MatrixXd jac = jac_of(theta);
    if (smallest_singular_value(jac) < kSingularTol) {
      needs_fallback = true;
      break;
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(-g);
    if (!step.allFinite()) {
      needs_fallback = true;
      break;
    }
    // Backtracking on the moment norm, with box projection at every trial.
    double t = 1.0;
    bool moved = false;
    Eigen::VectorXd cand;
    Eigen::VectorXd g_cand;
    double n_cand = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      cand = score.project(theta + t * step);
      if ((cand - theta).norm() == 0.0) break;  // pinned to the boundary
      g_cand = g_of(cand);
      n_cand = g_cand.norm();
      if (n_cand <= norm * (1.0 - 1e-4 * t)) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // No descent along the Newton direction: accept a box-stationary point
      // of 0.5*||g||^2, else hand off to the derivative-free fallback.
      const Eigen::VectorXd grad = jac.transpose() * g;
      const double pg = (score.project(theta - grad) - theta).norm();
      if (pg < kStationaryTol) {
        stationary = true;
      } else {
        needs_fallback = true;
      }
      break;
    }
    theta = cand;
    g = g_cand;
    norm = n_cand;
    best.offer(theta, norm);
  }

  if (best.norm <= eps || stationary) {
    const SolveMethod method = score.affine_in_theta
                                   ? SolveMethod::closed_form
                                   : SolveMethod::gauss_newton;
    return SolveResult{best.theta, best.norm, std::max(iterations, 1), method,
                       true};
  }

  if (config.fallback_enabled &&
      (needs_fallback || iterations >= config.max_iters)) {
    auto h = [&](const Eigen::VectorXd& th) {
      return g_of(score.project(th)).norm();
    };
    const int budget = std::max(200, 80 * score.d_theta);
    const int evals = nelder_mead(h, score, best.theta, budget, best);
    iterations += evals;
    if (best.norm <= eps)
      return SolveResult{best.theta, best.norm, iterations,
                         SolveMethod::derivative_free, true};
    // The polish may have landed on a boundary minimum above eps; accept it
    // only if it is gradient-stationary there.
    const Eigen::MatrixXd jac = jac_of(best.theta);
    const Eigen::VectorXd grad = jac.transpose() * g_of(best.theta);
    const double pg = (score.project(best.theta - grad) - best.theta).norm();
    if (pg < kStationaryTol)
      return SolveResult{best.theta, best.norm, iterations,
                         SolveMethod::derivative_free, true};
  }

  std::ostringstream msg;
  msg << "moment solve did not reach tolerance " << eps
      << " (best norm " << best.norm << " after " << iterations
      << " iterations)";
  SolveResult b{best.theta, best.norm, iterations,
                config.fallback_enabled ? SolveMethod::derivative_free
                                        : SolveMethod::gauss_newton,
                false};
  throw NonConvergenceError(msg.str(), std::move(b));
}

Eigen::MatrixXd estimate_jacobian(const ScoreFunction& score,
                                  const Dataset& data,
                                  const std::vector<int>& fold,
                                  const NuisanceModel& eta,
                                  const Eigen::VectorXd& theta,
                                  const SolverConfig& config) {
  score.validate();
  config.validate();
  if (fold.empty()) throw InvalidParamError("estimate_jacobian got an empty fold");
  if (theta.size() != score.d_theta)
    throw DimensionMismatchError("theta length does not match score");
  return fold_jacobian(score, data, fold, eta, nullptr, theta, config.fd_step);
}

}  // namespace dmlboot
