#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skillnet/kernels.hpp"

namespace skillnet {

class ClassifyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fewer than two distinct labels in the training data.
class DegenerateLabelsError : public ClassifyError {
 public:
  using ClassifyError::ClassifyError;
};

class DimensionMismatchError : public ClassifyError {
 public:
  using ClassifyError::ClassifyError;
};

/// Labelled feature vectors (tau^B for branches, tau^E for edges).
struct TrainingSet {
  std::vector<Eigen::VectorXd> features;
  std::vector<std::string> labels;

  void add(Eigen::VectorXd y, std::string label);
  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
  Eigen::Index dim() const;
  /// Distinct labels in lexicographic order.
  std::vector<std::string> classes() const;
};

/// Lower bound on a standardisation scale. Dimensions that barely vary in a
/// small training set would otherwise dominate every new point.
inline constexpr double kScaleFloor = 0.1;

/// Per-dimension affine normalisation estimated on the training data.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const std::vector<Eigen::VectorXd>& data);
  Eigen::VectorXd apply(const Eigen::VectorXd& y) const;
};

/// Feature map applied after standardisation. Quadratic appends every
/// product z_i z_j (i <= j) of the standardised features.
enum class FeatureBasis { Linear, Quadratic };

struct SelectorOptions {
  double lambda = 1e-3;
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  FeatureBasis basis = FeatureBasis::Linear;
  ExecPolicy policy = ExecPolicy::Parallel;
};

/// One-vs-rest logistic classifier. Scores are the raw per-class sigmoids
/// sigma(beta_k^T [phi(standardize(y)); 1]); they are not normalised across
/// classes, so a "no confident class" outcome remains observable.
///
/// A selector with a single class is constant and scores that class 1.
class LogisticSelector {
 public:
  LogisticSelector() = default;

  static LogisticSelector constant(std::string label, Eigen::Index dim);

  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<Eigen::VectorXd>& weights() const { return weights_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const SelectorOptions& options() const { return options_; }
  Eigen::Index input_dim() const { return input_dim_; }
  bool is_constant() const { return classes_.size() == 1; }
  bool empty() const { return classes_.empty(); }

  /// Scores in class-list order.
  std::vector<double> predict(const Eigen::VectorXd& y) const;
  /// Index of the highest score; ties go to the lowest index.
  std::size_t argmax(const Eigen::VectorXd& y) const;
  /// Standardised, basis-expanded feature with trailing bias entry.
  Eigen::VectorXd design(const Eigen::VectorXd& y) const;

  /// Reassembles a selector from stored parts (deserialisation).
  static LogisticSelector from_parts(std::vector<std::string> classes,
                                     std::vector<Eigen::VectorXd> weights,
                                     Standardizer standardizer, SelectorOptions options,
                                     Eigen::Index input_dim);

 private:
  friend LogisticSelector fit_ovr_logistic(const TrainingSet&, const SelectorOptions&);

  std::vector<std::string> classes_;
  std::vector<Eigen::VectorXd> weights_;
  Standardizer standardizer_;
  SelectorOptions options_;
  Eigen::Index input_dim_ = 0;
};

Eigen::VectorXd expand_basis(const Eigen::VectorXd& z, FeatureBasis basis);

/// Fits every class's weight vector by minimising the mean negative
/// log-likelihood plus lambda * ||beta||^2.
LogisticSelector fit_ovr_logistic(const TrainingSet& data, const SelectorOptions& options = {});

/// fit_ovr_logistic for two or more classes, constant selector for one.
LogisticSelector fit_selector(const TrainingSet& data, const SelectorOptions& options = {});

/// Appends the point and refits from scratch on the extended set.
std::pair<LogisticSelector, TrainingSet> add_point_and_refit(const LogisticSelector& selector,
                                                             TrainingSet data,
                                                             Eigen::VectorXd y,
                                                             std::string label);

/// Per-class Gaussian likelihood classifier (baseline).
struct GaussianPrecondition {
  std::vector<std::string> classes;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  std::vector<double> log_densities(const Eigen::VectorXd& y) const;
  std::size_t predict_index(const Eigen::VectorXd& y) const;
  std::string predict(const Eigen::VectorXd& y) const;
};

inline constexpr double kPreconditionFloor = 1e-6;

GaussianPrecondition fit_gaussian_precondition(const TrainingSet& data);

/// Log-density of N(mean, cov) at y via Cholesky.
double gaussian_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

}  // namespace skillnet
