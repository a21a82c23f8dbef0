#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "skillnet/classify.hpp"
#include "skillnet/kernels.hpp"

#include "oracles.hpp"

using namespace skillnet;
using oracle::reference_gradient;
using oracle::reference_loss;

namespace {

TrainingSet blobs(int per_class, int dim, std::uint64_t seed, double spread = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, spread);
  TrainingSet t;
  const char* names[] = {"a", "b", "c"};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Eigen::VectorXd y(dim);
      for (int d = 0; d < dim; ++d) y[d] = n(rng) + (d % 3 == c ? 2.0 : 0.0);
      t.add(y, names[c]);
    }
  }
  return t;
}

}  // namespace

TEST(Logistic, LossMatchesReference) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(20, 6);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  Eigen::VectorXd y(20), b(6);
  for (int i = 0; i < 20; ++i) y[i] = i % 2;
  for (int i = 0; i < 6; ++i) b[i] = 3 * n(rng);
  EXPECT_NEAR(kernels::logistic_loss(x, y, b, 1e-3), reference_loss(x, y, b, 1e-3), 1e-12);
  EXPECT_LT((kernels::logistic_gradient(x, y, b, 1e-3) - reference_gradient(x, y, b, 1e-3)).norm(), 1e-12);
}

TEST(Logistic, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> dims(2, 20), rows(3, 40);
  const double h = 1e-5;
  for (int inst = 0; inst < 100; ++inst) {
    const int D = dims(rng), M = rows(rng);
    Eigen::MatrixXd x(M, D);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    Eigen::VectorXd y(M), b(D);
    for (int i = 0; i < M; ++i) y[i] = n(rng) > 0;
    for (int i = 0; i < D; ++i) b[i] = n(rng);
    const Eigen::VectorXd g = kernels::logistic_gradient(x, y, b, 1e-3);
    Eigen::VectorXd fd(D);
    for (int i = 0; i < D; ++i) {
      Eigen::VectorXd bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      fd[i] = (reference_loss(x, y, bp, 1e-3) - reference_loss(x, y, bm, 1e-3)) / (2 * h);
    }
    EXPECT_LT((g - fd).norm() / std::max(fd.norm(), 1e-12), 1e-4) << "instance " << inst;
  }
}

TEST(Logistic, FitReachesStationaryPointAndLossIsMonotone) {
  const TrainingSet t = blobs(10, 4, 3, 1.0);
  const LogisticSelector s = fit_ovr_logistic(t, {});
  ASSERT_EQ(s.classes().size(), 3u);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(t.size()), s.weights()[0].size());
  for (std::size_t i = 0; i < t.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = s.design(t.features[i]).transpose();
  for (std::size_t k = 0; k < 3; ++k) {
    Eigen::VectorXd y(x.rows());
    for (std::size_t i = 0; i < t.size(); ++i) y[static_cast<Eigen::Index>(i)] = t.labels[i] == s.classes()[k];
    EXPECT_LT(reference_gradient(x, y, s.weights()[k], 1e-3).norm(), 1e-6);

    LogisticProblem p;
    p.design = &x;
    const auto r = kernels::fit_binary_logistic(p, y);
    for (std::size_t i = 1; i < r.loss_history.size(); ++i)
      EXPECT_LE(r.loss_history[i], r.loss_history[i - 1] + 1e-15);
  }
}

TEST(Logistic, SeparatesBlobsWithConfidence) {
  const TrainingSet t = blobs(8, 3, 4);
  const LogisticSelector s = fit_selector(t);
  const TrainingSet test = blobs(20, 3, 99);
  for (std::size_t i = 0; i < test.size(); ++i) {
    EXPECT_EQ(s.classes()[s.argmax(test.features[i])], test.labels[i]);
  }
  const auto sc = s.predict(t.features[0]);
  EXPECT_GT(sc[0], 0.8);
  for (double v : sc) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Logistic, SerialAndParallelIdentical) {
  const TrainingSet t = blobs(15, 6, 5, 0.8);
  SelectorOptions serial, parallel;
  serial.policy = ExecPolicy::Serial;
  parallel.policy = ExecPolicy::Parallel;
  const auto a = fit_ovr_logistic(t, serial), b = fit_ovr_logistic(t, parallel);
  for (std::size_t k = 0; k < a.weights().size(); ++k) EXPECT_EQ(a.weights()[k], b.weights()[k]);
}

TEST(Logistic, SingleClassIsConstant) {
  TrainingSet t;
  t.add(Eigen::Vector2d(1, 2), "only");
  t.add(Eigen::Vector2d(3, 1), "only");
  EXPECT_THROW(fit_ovr_logistic(t), DegenerateLabelsError);
  const auto s = fit_selector(t);
  EXPECT_TRUE(s.is_constant());
  EXPECT_EQ(s.predict(Eigen::Vector2d(-10, 7)), std::vector<double>{1.0});
}

TEST(Logistic, DimensionMismatchRejected) {
  const auto s = fit_selector(blobs(5, 3, 6));
  EXPECT_THROW(s.predict(Eigen::VectorXd::Zero(4)), DimensionMismatchError);
}

TEST(Logistic, AddPointRefitsOnExtendedSet) {
  TrainingSet t = blobs(5, 3, 7);
  const auto s = fit_selector(t);
  const Eigen::Vector3d y(-3, -3, -3);
  auto [s2, t2] = add_point_and_refit(s, t, y, "d");
  EXPECT_EQ(t2.size(), t.size() + 1);
  EXPECT_EQ(s2.classes().size(), 4u);
  EXPECT_EQ(s2.classes()[s2.argmax(y)], "d");
}

TEST(Logistic, FitTimeUnderBound) {
  // 50 samples of dimension 42, five classes
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  TrainingSet t;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd y(42);
    for (int d = 0; d < 42; ++d) y[d] = n(rng) + (d == i % 5 ? 2 : 0);
    t.add(y, std::string(1, static_cast<char>('a' + i % 5)));
  }
  const auto t0 = std::chrono::steady_clock::now();
  fit_selector(t);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 0.2);
}

TEST(Standardizer, PopulationStatisticsWithScaleFloor) {
  std::vector<Eigen::VectorXd> data = {Eigen::Vector3d(1, 5, 0.00), Eigen::Vector3d(3, 5, 0.02),
                                       Eigen::Vector3d(5, 5, 0.01)};
  const auto s = Standardizer::fit(data);
  EXPECT_NEAR(s.mean[0], 3.0, 1e-15);
  EXPECT_NEAR(s.scale[0], std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(s.scale[1], kScaleFloor);  // constant dimension
  EXPECT_DOUBLE_EQ(s.scale[2], kScaleFloor);  // sd ~ 0.008 < floor
  EXPECT_NEAR(s.apply(Eigen::Vector3d(3, 6, 0.01))[1], 10.0, 1e-12);
}

TEST(Basis, QuadraticAppendsUpperTriangleProducts) {
  const Eigen::Vector3d z(1, 2, 3);
  const Eigen::VectorXd q = expand_basis(z, FeatureBasis::Quadratic);
  Eigen::VectorXd expect(9);
  expect << 1, 2, 3, 1, 2, 3, 4, 6, 9;
  EXPECT_EQ(q, expect);
  EXPECT_EQ(expand_basis(z, FeatureBasis::Linear), Eigen::VectorXd(z));
}

TEST(GaussianPrecondition, LogDensityMatchesClosedForm) {
  Eigen::Vector2d mu(1, -1), y(0.3, 0.2);
  Eigen::Matrix2d cov;
  cov << 2.0, 0.3, 0.3, 0.5;
  const Eigen::Vector2d d = y - mu;
  const double expect =
      -0.5 * d.dot(cov.inverse() * d) - std::log(2 * M_PI) - 0.5 * std::log(cov.determinant());
  EXPECT_NEAR(gaussian_log_density(y, mu, cov), expect, 1e-12);
}

TEST(GaussianPrecondition, PicksMostLikelyClass) {
  const TrainingSet t = blobs(6, 3, 10);
  const auto g = fit_gaussian_precondition(t);
  EXPECT_EQ(g.predict(Eigen::Vector3d(2, 0, 0)), "a");
  EXPECT_EQ(g.predict(Eigen::Vector3d(0, 2, 0)), "b");
}
