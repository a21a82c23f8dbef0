#include "skillnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace skillnet::kernels {

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-20;

}  // namespace

double logistic_loss(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                     const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd t = design * beta;
  double nll = 0.0;
  for (Eigen::Index m = 0; m < t.size(); ++m) nll += softplus(t[m]) - targets[m] * t[m];
  return nll / static_cast<double>(t.size()) + lambda * beta.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                  const Eigen::VectorXd& beta, double lambda) {
  const Eigen::VectorXd t = design * beta;
  Eigen::VectorXd residual(t.size());
  for (Eigen::Index m = 0; m < t.size(); ++m) residual[m] = sigmoid(t[m]) - targets[m];
  return design.transpose() * residual / static_cast<double>(t.size()) + 2.0 * lambda * beta;
}

LogisticFitResult fit_binary_logistic(const LogisticProblem& problem,
                                      const Eigen::VectorXd& targets) {
  const Eigen::MatrixXd& x = *problem.design;
  const double n = static_cast<double>(x.rows());
  LogisticFitResult out;
  out.beta = Eigen::VectorXd::Zero(x.cols());

  double loss = logistic_loss(x, targets, out.beta, problem.lambda);
  out.loss_history.push_back(loss);
  Eigen::VectorXd grad = logistic_gradient(x, targets, out.beta, problem.lambda);

  // Lipschitz bound of the gradient gives a safe first step.
  double step = 1.0 / (0.25 * x.squaredNorm() / n + 2.0 * problem.lambda);
  Eigen::VectorXd prev_beta, prev_grad;

  for (int it = 0; it < problem.max_iterations; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < problem.gradient_tolerance) break;
    if (it > 0) {
      const Eigen::VectorXd s = out.beta - prev_beta;
      const Eigen::VectorXd y = grad - prev_grad;
      const double sy = s.dot(y);
      if (sy > 0) step = s.squaredNorm() / sy;
    }
    const double g2 = grad.squaredNorm();
    Eigen::VectorXd candidate;
    double candidate_loss = std::numeric_limits<double>::infinity();
    while (step > kMinStep) {
      candidate = out.beta - step * grad;
      candidate_loss = logistic_loss(x, targets, candidate, problem.lambda);
      if (candidate_loss <= loss - kArmijo * step * g2) break;
      step *= 0.5;
    }
    if (step <= kMinStep || !(candidate_loss <= loss)) break;

    prev_beta = out.beta;
    prev_grad = grad;
    out.beta = candidate;
    loss = candidate_loss;
    grad = logistic_gradient(x, targets, out.beta, problem.lambda);
    out.loss_history.push_back(loss);
    out.iterations = it + 1;
  }
  return out;
}

std::vector<Eigen::VectorXd> fit_one_vs_rest(const LogisticProblem& problem,
                                             const std::vector<int>& labels, int n_classes,
                                             ExecPolicy policy) {
  std::vector<Eigen::VectorXd> weights(static_cast<std::size_t>(n_classes));
  auto fit_class = [&](int k) {
    Eigen::VectorXd targets(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t m = 0; m < labels.size(); ++m) {
      targets[static_cast<Eigen::Index>(m)] = labels[m] == k ? 1.0 : 0.0;
    }
    weights[static_cast<std::size_t>(k)] = fit_binary_logistic(problem, targets).beta;
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n_classes; ++k) fit_class(k);
  } else {
    for (int k = 0; k < n_classes; ++k) fit_class(k);
  }
  return weights;
}

Eigen::MatrixXd predict_scores(const std::vector<Eigen::VectorXd>& weights,
                               const Eigen::MatrixXd& design, ExecPolicy policy) {
  const Eigen::Index n = design.rows();
  const auto k = static_cast<Eigen::Index>(weights.size());
  Eigen::MatrixXd scores(n, k);
  auto row = [&](Eigen::Index m) {
    for (Eigen::Index c = 0; c < k; ++c) {
      scores(m, c) = sigmoid(design.row(m).dot(weights[static_cast<std::size_t>(c)]));
    }
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index m = 0; m < n; ++m) row(m);
  } else {
    for (Eigen::Index m = 0; m < n; ++m) row(m);
  }
  return scores;
}

Eigen::MatrixXd component_log_likelihoods(const std::vector<Eigen::MatrixXd>& frame_data,
                                          const std::vector<double>& priors,
                                          const std::vector<std::vector<Eigen::VectorXd>>& means,
                                          const std::vector<std::vector<Eigen::MatrixXd>>& covs,
                                          ExecPolicy policy) {
  const auto n_comp = static_cast<Eigen::Index>(priors.size());
  const std::size_t n_frames = frame_data.size();
  const Eigen::Index n = frame_data.front().rows();
  const Eigen::Index dim = frame_data.front().cols();
  const double log_2pi = std::log(2.0 * M_PI);

  // Factorisations are shared by every sample.
  std::vector<std::vector<Eigen::LLT<Eigen::MatrixXd>>> chol(static_cast<std::size_t>(n_comp));
  std::vector<std::vector<double>> log_det(static_cast<std::size_t>(n_comp));
  for (std::size_t k = 0; k < static_cast<std::size_t>(n_comp); ++k) {
    for (std::size_t p = 0; p < n_frames; ++p) {
      chol[k].emplace_back(covs[k][p]);
      const auto& l = chol[k].back().matrixL();
      double ld = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) ld += 2.0 * std::log(l(i, i));
      log_det[k].push_back(ld);
    }
  }

  Eigen::MatrixXd out(n, n_comp);
  auto sample = [&](Eigen::Index t) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_comp); ++k) {
      double ll = std::log(priors[k]);
      for (std::size_t p = 0; p < n_frames; ++p) {
        const Eigen::VectorXd diff = frame_data[p].row(t).transpose() - means[k][p];
        const Eigen::VectorXd z = chol[k][p].matrixL().solve(diff);
        ll += -0.5 * (z.squaredNorm() + log_det[k][p] + static_cast<double>(dim) * log_2pi);
      }
      out(t, static_cast<Eigen::Index>(k)) = ll;
    }
  };
  if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index t = 0; t < n; ++t) sample(t);
  } else {
    for (Eigen::Index t = 0; t < n; ++t) sample(t);
  }
  return out;
}

}  // namespace skillnet::kernels
