#include "dmlboot/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dmlboot/rng.hpp"

namespace dmlboot {

// --- schema / dataset --------------------------------------------------------

void ColumnSchema::validate() const {
  const int w = width();
  if (w <= 0) throw InvalidSpecError("schema has no columns");
  auto in_range = [w](int c) { return c >= 0 && c < w; };
  if (!in_range(outcome))
    throw InvalidSpecError("schema outcome column out of range");
  if (treatment != -1 && !in_range(treatment))
    throw InvalidSpecError("schema treatment column out of range");
  for (int c : covariates)
    if (!in_range(c)) throw InvalidSpecError("schema covariate column out of range");
}

Dataset::Dataset(Eigen::MatrixXd rows, ColumnSchema schema)
    : rows_(std::move(rows)), schema_(std::move(schema)) {
  schema_.validate();
  if (rows_.rows() < 2) throw InvalidSpecError("dataset needs at least 2 rows");
  if (rows_.cols() != schema_.width())
    throw DimensionMismatchError("dataset width does not match schema");
  if (!rows_.allFinite())
    throw InvalidSpecError("dataset contains non-finite values");
}

double Dataset::treatment(int i) const {
  if (!schema_.has_treatment())
    throw UnknownRoleError("dataset schema has no treatment column");
  return rows_(i, schema_.treatment);
}

Eigen::VectorXd Dataset::covariates(int i) const {
  Eigen::VectorXd x(schema_.covariates.size());
  for (std::size_t j = 0; j < schema_.covariates.size(); ++j)
    x[static_cast<Eigen::Index>(j)] = rows_(i, schema_.covariates[j]);
  return x;
}

// --- folds ---------------------------------------------------------------------

std::vector<int> FoldPartition::complement(int k) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n - m));
  for (int j = 0; j < K; ++j) {
    if (j == k) continue;
    out.insert(out.end(), folds[j].begin(), folds[j].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int FoldPartition::fold_of(int i) const {
  for (int k = 0; k < K; ++k)
    if (std::binary_search(folds[k].begin(), folds[k].end(), i)) return k;
  throw InvalidParamError("row index outside the partition");
}

namespace {

FoldPartition cut_into_folds(std::vector<int> order, int n, int K) {
  FoldPartition p;
  p.n = n;
  p.K = K;
  p.m = n / K;
  p.folds.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    auto& f = p.folds[static_cast<std::size_t>(k)];
    f.assign(order.begin() + static_cast<std::ptrdiff_t>(k) * p.m,
             order.begin() + static_cast<std::ptrdiff_t>(k + 1) * p.m);
    std::sort(f.begin(), f.end());
  }
  return p;
}

void check_fold_args(int n, int K) {
  if (K < 2) throw InvalidKError("fold count K must be at least 2");
  if (n < K) throw DivisibilityError("sample size smaller than fold count");
  if (n % K != 0)
    throw DivisibilityError("fold count K must divide the sample size n");
}

}  // namespace

FoldPartition make_folds(int n, int K) {
  check_fold_args(n, K);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  return cut_into_folds(std::move(order), n, K);
}

FoldPartition make_folds_shuffled(int n, int K, std::uint64_t seed) {
  check_fold_args(n, K);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(derive_seed(seed, 0xf01d));
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(pick(rng))]);
  }
  return cut_into_folds(std::move(order), n, K);
}

// --- score / solver config ------------------------------------------------------

void ScoreFunction::validate() const {
  if (d_theta < 1) throw InvalidSpecError("score needs d_theta >= 1");
  if (!evaluate) throw InvalidSpecError("score has no evaluate function");
  if (theta_lower.size() != d_theta || theta_upper.size() != d_theta)
    throw InvalidSpecError("score box bounds must have length d_theta");
  for (int j = 0; j < d_theta; ++j) {
    if (!(theta_lower[j] < theta_upper[j]))
      throw InvalidSpecError("score box must have lower < upper");
    if (!std::isfinite(theta_lower[j]) || !std::isfinite(theta_upper[j]))
      throw InvalidSpecError("score box bounds must be finite");
  }
}

double SolverConfig::resolve_epsilon(int n) const {
  if (epsilon_n >= 0.0) return epsilon_n;
  return std::pow(static_cast<double>(n), -0.75);
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidParamError("solver max_iters must be positive");
  if (!(fd_step > 0.0)) throw InvalidParamError("solver fd_step must be positive");
  if (epsilon_n >= 0.0 && !std::isfinite(epsilon_n))
    throw InvalidParamError("solver epsilon_n must be finite");
}

// --- moment evaluation ------------------------------------------------------------

Eigen::VectorXd check_moment(const ScoreFunction& score, const Dataset& data,
                             const Eigen::Ref<const Eigen::VectorXd>& theta,
                             const NuisanceModel& eta,
                             const WeightVector* weights,
                             const std::vector<int>* fold) {
  score.validate();
  if (theta.size() != score.d_theta)
    throw DimensionMismatchError("theta length does not match score d_theta");
  if (weights && weights->w.size() != data.n())
    throw DimensionMismatchError("weight vector length does not match data");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(score.d_theta);
  const auto add_row = [&](int i) {
    const double w = weights ? weights->w[i] : 1.0;
    if (w == 0.0) return;  // skip zeroed rows; keeps sums exact for delete_h
    acc += w * score.evaluate(data.rows().row(i), data.schema(), theta, eta);
  };
  int count = 0;
  if (fold) {
    for (int i : *fold) {
      if (i < 0 || i >= data.n())
        throw InvalidParamError("fold index outside the dataset");
      add_row(i);
    }
    count = static_cast<int>(fold->size());
  } else {
    for (int i = 0; i < data.n(); ++i) add_row(i);
    count = data.n();
  }
  if (count == 0) throw InvalidParamError("empty fold in check_moment");
  return acc / count;
}

}  // namespace dmlboot
