#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation and a
// serial reference; both produce bit-identical results because parallelism
// is only over independent work items (classes, samples, lattice points),
// never over a floating-point reduction.

#include <vector>

#include <Eigen/Core>

namespace skillnet {

enum class ExecPolicy { Serial, Parallel };

struct LogisticFitResult {
  Eigen::VectorXd beta;
  std::vector<double> loss_history;
  int iterations = 0;
};

struct LogisticProblem {
  const Eigen::MatrixXd* design = nullptr;  // n x D, last column is the bias
  double lambda = 1e-3;
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
};

namespace kernels {

/// Mean negative log-likelihood of binary targets plus lambda ||beta||^2.
double logistic_loss(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                     const Eigen::VectorXd& beta, double lambda);
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                                  const Eigen::VectorXd& beta, double lambda);

/// Gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking; the loss never increases between iterations.
LogisticFitResult fit_binary_logistic(const LogisticProblem& problem,
                                      const Eigen::VectorXd& targets);

/// One binary problem per class; class k's targets are 1{label == k}.
std::vector<Eigen::VectorXd> fit_one_vs_rest(const LogisticProblem& problem,
                                             const std::vector<int>& labels, int n_classes,
                                             ExecPolicy policy);

/// Sigmoid scores, rows = samples, columns = classes.
Eigen::MatrixXd predict_scores(const std::vector<Eigen::VectorXd>& weights,
                               const Eigen::MatrixXd& design, ExecPolicy policy);

/// Unnormalised log-responsibilities log pi_k + sum_p log N(x^p_t | mu_k^p, Sigma_k^p),
/// rows = samples, columns = components. `frame_data[p]` is n x D.
Eigen::MatrixXd component_log_likelihoods(const std::vector<Eigen::MatrixXd>& frame_data,
                                          const std::vector<double>& priors,
                                          const std::vector<std::vector<Eigen::VectorXd>>& means,
                                          const std::vector<std::vector<Eigen::MatrixXd>>& covs,
                                          ExecPolicy policy);

}  // namespace kernels
}  // namespace skillnet
