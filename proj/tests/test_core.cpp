#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "dmlboot/core.hpp"
#include "dmlboot/rng.hpp"
#include "test_helpers.hpp"

using namespace dmlboot;
using testutil::make_y_dataset;
using testutil::make_yd_dataset;
using testutil::null_eta;

// --- fold partitions --------------------------------------------------------

TEST_CASE("make_folds splits six rows into three contiguous pairs") {
  const FoldPartition p = make_folds(6, 3);
  CHECK(p.n == 6);
  CHECK(p.K == 3);
  CHECK(p.m == 2);
  REQUIRE(p.folds.size() == 3);
  CHECK(p.fold(0) == std::vector<int>{0, 1});
  CHECK(p.fold(1) == std::vector<int>{2, 3});
  CHECK(p.fold(2) == std::vector<int>{4, 5});
}

TEST_CASE("make_folds splits four rows into two contiguous pairs") {
  const FoldPartition p = make_folds(4, 2);
  CHECK(p.fold(0) == std::vector<int>{0, 1});
  CHECK(p.fold(1) == std::vector<int>{2, 3});
}

TEST_CASE("make_folds rejects non-divisible and degenerate K") {
  CHECK_THROWS_AS(make_folds(5, 2), DivisibilityError);
  CHECK_THROWS_AS(make_folds(10, 3), DivisibilityError);
  CHECK_THROWS_AS(make_folds(10, 1), InvalidKError);
  CHECK_THROWS_AS(make_folds(10, 0), InvalidKError);
  CHECK_THROWS_AS(make_folds(10, -2), InvalidKError);
}

TEST_CASE("make_folds is a pure function of its arguments") {
  const FoldPartition a = make_folds(12, 4);
  const FoldPartition b = make_folds(12, 4);
  REQUIRE(a.folds.size() == b.folds.size());
  for (std::size_t k = 0; k < a.folds.size(); ++k)
    CHECK(a.folds[k] == b.folds[k]);
}

TEST_CASE("fold complement returns the other rows sorted") {
  const FoldPartition p = make_folds(6, 3);
  CHECK(p.complement(0) == std::vector<int>{2, 3, 4, 5});
  CHECK(p.complement(1) == std::vector<int>{0, 1, 4, 5});
  CHECK(p.complement(2) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("fold_of maps each row to its containing fold") {
  const FoldPartition p = make_folds(6, 3);
  CHECK(p.fold_of(0) == 0);
  CHECK(p.fold_of(1) == 0);
  CHECK(p.fold_of(2) == 1);
  CHECK(p.fold_of(5) == 2);
}

TEST_CASE("shuffled folds partition all rows into equal disjoint blocks") {
  const int n = 24, K = 4;
  const FoldPartition p = make_folds_shuffled(n, K, 77);
  std::set<int> seen;
  for (int k = 0; k < K; ++k) {
    REQUIRE(static_cast<int>(p.fold(k).size()) == n / K);
    CHECK(std::is_sorted(p.fold(k).begin(), p.fold(k).end()));
    for (int i : p.fold(k)) {
      CHECK(i >= 0);
      CHECK(i < n);
      CHECK(seen.insert(i).second);  // disjoint
    }
  }
  CHECK(static_cast<int>(seen.size()) == n);

  // Deterministic in the seed; (almost surely) different across seeds.
  const FoldPartition q = make_folds_shuffled(n, K, 77);
  for (int k = 0; k < K; ++k) CHECK(p.fold(k) == q.fold(k));
  const FoldPartition r = make_folds_shuffled(n, K, 78);
  bool any_differs = false;
  for (int k = 0; k < K; ++k) any_differs = any_differs || (p.fold(k) != r.fold(k));
  CHECK(any_differs);
}

// --- dataset invariants -------------------------------------------------------

TEST_CASE("dataset requires at least two rows and finite values") {
  ColumnSchema schema;
  schema.names = {"y"};
  schema.outcome = 0;

  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  CHECK_THROWS_AS(Dataset(one, schema), InvalidSpecError);

  Eigen::MatrixXd bad(2, 1);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(Dataset(bad, schema), InvalidSpecError);

  Eigen::MatrixXd inf(2, 1);
  inf << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Dataset(inf, schema), InvalidSpecError);
}

TEST_CASE("dataset rejects schema whose width disagrees with the matrix") {
  ColumnSchema schema;
  schema.names = {"y", "x1"};
  schema.outcome = 0;
  schema.covariates = {1};
  Eigen::MatrixXd rows(3, 1);
  rows << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(Dataset(rows, schema), DimensionMismatchError);
}

TEST_CASE("dataset accessors honor the schema roles") {
  Eigen::MatrixXd rows(2, 4);
  rows << 1.0, 2.0, 3.0, 4.0,
          5.0, 6.0, 7.0, 8.0;
  ColumnSchema schema;
  schema.names = {"x2", "y", "d", "x1"};
  schema.outcome = 1;
  schema.treatment = 2;
  schema.covariates = {3, 0};  // deliberate non-contiguous, reordered
  const Dataset data(rows, schema);

  CHECK(data.outcome(0) == 2.0);
  CHECK(data.outcome(1) == 6.0);
  CHECK(data.treatment(0) == 3.0);
  const Eigen::VectorXd x0 = data.covariates(0);
  REQUIRE(x0.size() == 2);
  CHECK(x0[0] == 4.0);  // x1 first per covariate order
  CHECK(x0[1] == 1.0);
}

TEST_CASE("dataset without a treatment column refuses treatment access") {
  const Dataset data = make_y_dataset({1.0, 2.0});
  CHECK_THROWS_AS(data.treatment(0), UnknownRoleError);
}

// --- check_moment -------------------------------------------------------------

TEST_CASE("check_moment of the centering score vanishes at the sample mean") {
  const Dataset data = make_y_dataset({1.0, 3.0});
  const ScoreFunction score = testutil::simple_mean_score();
  Eigen::VectorXd theta(1);
  theta << 2.0;
  const Eigen::VectorXd m = check_moment(score, data, theta, null_eta());
  REQUIRE(m.size() == 1);
  CHECK(m[0] == 0.0);
}

TEST_CASE("check_moment applies weights without renormalizing them") {
  // n = 2, w = (2, 0): (1/2) * (2*(1-2) + 0*(3-2)) = -1.
  const Dataset data = make_y_dataset({1.0, 3.0});
  const ScoreFunction score = testutil::simple_mean_score();
  Eigen::VectorXd theta(1);
  theta << 2.0;
  WeightVector wv;
  wv.w = Eigen::VectorXd(2);
  wv.w << 2.0, 0.0;
  const Eigen::VectorXd m = check_moment(score, data, theta, null_eta(), &wv);
  CHECK(m[0] == -1.0);
}

TEST_CASE("check_moment restricted to a single-row fold averages that row") {
  const Dataset data = make_y_dataset({5.0, 7.0});
  const ScoreFunction score = testutil::simple_mean_score();
  Eigen::VectorXd theta(1);
  theta << 5.0;
  const std::vector<int> fold = {0};
  const Eigen::VectorXd m =
      check_moment(score, data, theta, null_eta(), nullptr, &fold);
  CHECK(m[0] == 0.0);

  Eigen::VectorXd theta2(1);
  theta2 << 4.0;
  const Eigen::VectorXd m2 =
      check_moment(score, data, theta2, null_eta(), nullptr, &fold);
  CHECK(m2[0] == 1.0);
}

TEST_CASE("check_moment is linear in the weight vector") {
  const Dataset data = make_y_dataset({0.5, -1.25, 2.0, 4.0, -0.75, 1.5});
  const ScoreFunction score = testutil::simple_mean_score();
  Eigen::VectorXd theta(1);
  theta << 0.3;

  Rng rng = make_rng(404);
  std::uniform_real_distribution<double> unif(0.0, 3.0);
  WeightVector w1, w2, wmix;
  w1.w = Eigen::VectorXd(6);
  w2.w = Eigen::VectorXd(6);
  for (int i = 0; i < 6; ++i) {
    w1.w[i] = unif(rng);
    w2.w[i] = unif(rng);
  }
  const double a = 0.37;
  wmix.w = a * w1.w + (1.0 - a) * w2.w;

  const double lhs =
      check_moment(score, data, theta, null_eta(), &wmix)[0];
  const double rhs =
      a * check_moment(score, data, theta, null_eta(), &w1)[0] +
      (1.0 - a) * check_moment(score, data, theta, null_eta(), &w2)[0];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("check_moment with unit weights equals the unweighted moment") {
  const Dataset data = make_yd_dataset({1.0, 2.0, 0.5, 3.0}, {2.0, 1.0, -1.0, 0.5});
  const ScoreFunction score = testutil::regression_score();
  Eigen::VectorXd theta(1);
  theta << 0.7;
  WeightVector ones;
  ones.w = Eigen::VectorXd::Ones(4);
  const Eigen::VectorXd a = check_moment(score, data, theta, null_eta());
  const Eigen::VectorXd b = check_moment(score, data, theta, null_eta(), &ones);
  CHECK(a[0] == b[0]);
}

TEST_CASE("check_moment validates theta, weight length, and fold contents") {
  const Dataset data = make_y_dataset({1.0, 3.0});
  const ScoreFunction score = testutil::simple_mean_score();
  Eigen::VectorXd theta_bad(2);
  theta_bad << 1.0, 2.0;
  CHECK_THROWS_AS(check_moment(score, data, theta_bad, null_eta()),
                  DimensionMismatchError);

  Eigen::VectorXd theta(1);
  theta << 1.0;
  WeightVector wrong_len;
  wrong_len.w = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(check_moment(score, data, theta, null_eta(), &wrong_len),
                  DimensionMismatchError);

  const std::vector<int> empty_fold;
  CHECK_THROWS_AS(
      check_moment(score, data, theta, null_eta(), nullptr, &empty_fold),
      InvalidParamError);

  const std::vector<int> out_of_range = {0, 5};
  CHECK_THROWS_AS(
      check_moment(score, data, theta, null_eta(), nullptr, &out_of_range),
      InvalidParamError);
}
