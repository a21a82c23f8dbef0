#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace skillnet;
using namespace oracle;

TEST(Viterbi, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> kd(1, 4);
  std::normal_distribution<double> n(0, 2);
  for (int c = 0; c < 200; ++c) {
    const int K = kd(rng);
    const int T = std::uniform_int_distribution<int>(K, 10)(rng);
    const BranchModel m = random_model(rng, K);
    std::vector<double> start(static_cast<std::size_t>(K)), goal(static_cast<std::size_t>(K));
    for (auto& v : start) v = n(rng);
    for (auto& v : goal) v = n(rng);
    const bool with_boundaries = c % 2 == 1;
    const auto* sp = with_boundaries ? &start : nullptr;
    const auto* gp = with_boundaries ? &goal : nullptr;
    const Best expect = enumerate(m, T, sp, gp);
    const ComponentSequence got = viterbi_components(m, T, sp, gp);
    ASSERT_TRUE(std::isfinite(expect.score)) << "case " << c;
    EXPECT_NEAR(got.log_score, expect.score, 1e-9) << "case " << c;
    // Ties are legitimate; the returned labelling must itself reach the optimum.
    if (got.indices != expect.labels) {
      const Best own = enumerate(m, T, sp, gp, &got.indices);
      EXPECT_NEAR(own.score, expect.score, 1e-9) << "case " << c;
    }
  }
}

TEST(Viterbi, HorizonShorterThanComponentsRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(viterbi_components(random_model(rng, 4), 3), SkillModelError);
}

TEST(Lqt, MatchesBatchLeastSquares) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  const int T = 12;
  std::vector<GlobalGaussian> gs;
  for (int k = 0; k < 3; ++k) {
    GlobalGaussian g;
    g.mean = Eigen::VectorXd(kStateDim);
    for (int i = 0; i < kStateDim; ++i) g.mean[i] = n(rng);
    Eigen::MatrixXd a(kStateDim, kStateDim);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = 0.3 * n(rng);
    g.covariance = a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(kStateDim, kStateDim);
    gs.push_back(g);
  }
  ComponentSequence seq;
  for (int t = 0; t < T; ++t) seq.indices.push_back(t * 3 / T);
  StateVector x0;
  for (int i = 0; i < kStateDim; ++i) x0[i] = n(rng);
  const LqgOptions opt;
  const Trajectory traj = lqg_retrieve(gs, seq, x0, opt);

  // Batch oracle: positions y_t = Sx x0 + Su u, cost sum (y_t - mu_t)' Q_t (.) + u' R u.
  const int D = kStateDim, N = 2 * D;
  const double dt = opt.dt;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(N, N);
  A.topRightCorner(D, D) = dt * Eigen::MatrixXd::Identity(D, D);
  Eigen::MatrixXd B(N, D);
  B << 0.5 * dt * dt * Eigen::MatrixXd::Identity(D, D), dt * Eigen::MatrixXd::Identity(D, D);
  Eigen::MatrixXd Sx(N * T, N), Su = Eigen::MatrixXd::Zero(N * T, D * T);
  Eigen::MatrixXd Ap = Eigen::MatrixXd::Identity(N, N);
  for (int t = 1; t <= T; ++t) {
    Ap = A * Ap;
    Sx.block((t - 1) * N, 0, N, N) = Ap;
    for (int s = 0; s < t; ++s) {
      Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(N, N);
      for (int i = 0; i < t - 1 - s; ++i) pw = A * pw;
      Su.block((t - 1) * N, s * D, N, D) = pw * B;
    }
  }
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N * T, N * T);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(N * T);
  for (int t = 0; t < T; ++t) {
    const auto& g = gs[static_cast<std::size_t>(seq.indices[static_cast<std::size_t>(t)])];
    Q.block(t * N, t * N, D, D) = g.covariance.inverse();
    mu.segment(t * N, D) = g.mean;
  }
  Eigen::VectorXd x0f = Eigen::VectorXd::Zero(N);
  x0f.head(D) = x0;
  const Eigen::MatrixXd R = opt.control_weight * Eigen::MatrixXd::Identity(D * T, D * T);
  const Eigen::VectorXd u =
      (Su.transpose() * Q * Su + R).ldlt().solve(Su.transpose() * Q * (mu - Sx * x0f));
  const Eigen::VectorXd x = Sx * x0f + Su * u;
  ASSERT_EQ(traj.size(), static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    EXPECT_LT((traj.controls[static_cast<std::size_t>(t)] - u.segment(t * D, D)).norm(), 1e-6) << t;
    EXPECT_LT((traj.states[static_cast<std::size_t>(t)] - x.segment(t * N, D)).norm(), 1e-8) << t;
  }
}

TEST(GlobalGmm, PrecisionWeightedProduct) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  BranchModel b;
  TPGMMComponent c;
  c.prior = 1;
  for (int p = 0; p < 2; ++p) {
    Eigen::VectorXd m(kStateDim);
    for (int i = 0; i < kStateDim; ++i) m[i] = n(rng);
    Eigen::MatrixXd a(kStateDim, kStateDim);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    c.means.push_back(m);
    c.covariances.push_back(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(kStateDim, kStateDim));
  }
  b.components = {c};
  b.transitions = Eigen::MatrixXd::Ones(1, 1);
  b.initial = Eigen::VectorXd::Ones(1);
  b.durations = {{3, 1}};
  const std::vector<Frame> frames = {
      Frame::from_pose(Pose::planar(0.3, -0.2, 0.1, 0.7)),
      Frame::from_pose(Pose::planar(-1.0, 0.5, 0.0, -2.0)),
  };
  const GlobalGmm g = global_gmm(b, frames);

  Eigen::MatrixXd prec = Eigen::MatrixXd::Zero(kStateDim, kStateDim);
  Eigen::VectorXd info = Eigen::VectorXd::Zero(kStateDim);
  for (int p = 0; p < 2; ++p) {
    // Hand-built state map: rotate position, shift position and yaw, keep gripper.
    const double yaw = frames[static_cast<std::size_t>(p)].yaw();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(kStateDim, kStateDim);
    A.topLeftCorner(3, 3) = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    Eigen::VectorXd off = Eigen::VectorXd::Zero(kStateDim);
    off.head(3) = frames[static_cast<std::size_t>(p)].origin;
    off[3] = yaw;
    const Eigen::MatrixXd S = A * c.covariances[static_cast<std::size_t>(p)] * A.transpose();
    const Eigen::VectorXd m = A * c.means[static_cast<std::size_t>(p)] + off;
    prec += S.inverse();
    info += S.inverse() * m;
  }
  const Eigen::MatrixXd cov = prec.inverse();
  EXPECT_LT((g.gaussians[0].covariance - cov).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((g.gaussians[0].mean - cov * info).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Em, LogLikelihoodNonDecreasingAndModelNormalised) {
  const ScenarioSpec spec = bin_sorting_spec();
  const auto demos = synth_demos(spec, "scan", "default", 6, 11);
  std::vector<const Demonstration*> ptrs;
  for (const auto& d : demos) ptrs.push_back(&d);
  SkillFitOptions opt;
  opt.components = 4;
  EmTrace trace;
  const BranchModel m = fit_branch(ptrs, FrameSpec{spec.skill("scan").frames}, opt, &trace);
  ASSERT_GE(trace.log_likelihood.size(), 2u);
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    EXPECT_GE(trace.log_likelihood[i], trace.log_likelihood[i - 1] - 1e-8 * std::abs(trace.log_likelihood[i - 1]));
  double prior_sum = 0;
  for (const auto& c : m.components) {
    prior_sum += c.prior;
    for (const auto& s : c.covariances) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
      EXPECT_GE(es.eigenvalues().minCoeff(), kCovarianceFloor * (1 - 1e-9));
    }
  }
  EXPECT_NEAR(prior_sum, 1.0, 1e-12);
  for (int k = 0; k < m.size(); ++k) EXPECT_NEAR(m.transitions.row(k).sum(), 1.0, 1e-12);
  EXPECT_NEAR(m.initial.sum(), 1.0, 1e-12);
}

TEST(Retrieval, EquivariantUnderRigidPlanarMotion) {
  const ScenarioSpec spec = bin_sorting_spec();
  EXPECT_LT(worst_equivariance_error(spec, train_skills(spec, 1), 10, 6), 1e-6);
}
