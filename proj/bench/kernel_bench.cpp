#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "skillnet/kernels.hpp"

using namespace skillnet;

namespace {

Eigen::MatrixXd random_design(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
    x(i, d) = 1.0;
  }
  return x;
}

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::Serial : ExecPolicy::Parallel;
}

// args: policy (0 serial, 1 OpenMP), samples, feature dim, classes
void BM_FitOneVsRest(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1)), d = static_cast<int>(state.range(2));
  const int k = static_cast<int>(state.range(3));
  const Eigen::MatrixXd x = random_design(n, d, 1);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % k;
  LogisticProblem p;
  p.design = &x;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::fit_one_vs_rest(p, labels, k, policy_of(state)));
}
BENCHMARK(BM_FitOneVsRest)
    ->ArgNames({"omp", "n", "d", "k"})
    ->Args({0, 50, 42, 5})
    ->Args({1, 50, 42, 5})
    ->Args({0, 200, 42, 8})
    ->Args({1, 200, 42, 8})
    ->Unit(benchmark::kMillisecond);

void BM_PredictScores(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1)), d = static_cast<int>(state.range(2));
  const int k = static_cast<int>(state.range(3));
  const Eigen::MatrixXd x = random_design(n, d, 2);
  std::vector<Eigen::VectorXd> w;
  for (int c = 0; c < k; ++c) w.push_back(Eigen::VectorXd::Random(d + 1));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::predict_scores(w, x, policy_of(state)));
}
BENCHMARK(BM_PredictScores)
    ->ArgNames({"omp", "n", "d", "k"})
    ->Args({0, 2500, 42, 5})
    ->Args({1, 2500, 42, 5})
    ->Args({0, 20000, 42, 5})
    ->Args({1, 20000, 42, 5})
    ->Unit(benchmark::kMicrosecond);

// args: policy, samples, frames, components
void BM_ComponentLogLikelihoods(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1)), P = static_cast<int>(state.range(2));
  const int K = static_cast<int>(state.range(3));
  constexpr int D = 5;
  std::vector<Eigen::MatrixXd> data;
  for (int p = 0; p < P; ++p) data.push_back(Eigen::MatrixXd::Random(n, D));
  std::vector<double> priors(K, 1.0 / K);
  std::vector<std::vector<Eigen::VectorXd>> means(K);
  std::vector<std::vector<Eigen::MatrixXd>> covs(K);
  for (int k = 0; k < K; ++k) {
    for (int p = 0; p < P; ++p) {
      means[k].push_back(Eigen::VectorXd::Random(D));
      const Eigen::MatrixXd a = Eigen::MatrixXd::Random(D, D);
      covs[k].push_back(a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(D, D));
    }
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(
        kernels::component_log_likelihoods(data, priors, means, covs, policy_of(state)));
}
BENCHMARK(BM_ComponentLogLikelihoods)
    ->ArgNames({"omp", "n", "P", "K"})
    ->Args({0, 500, 2, 5})
    ->Args({1, 500, 2, 5})
    ->Args({0, 5000, 3, 8})
    ->Args({1, 5000, 3, 8})
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
