#include "skillnet/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

namespace skillnet {

void TrainingSet::add(Eigen::VectorXd y, std::string label) {
  if (!features.empty() && y.size() != features.front().size()) {
    throw DimensionMismatchError("training point has dimension " + std::to_string(y.size()) +
                                 ", expected " + std::to_string(features.front().size()));
  }
  features.push_back(std::move(y));
  labels.push_back(std::move(label));
}

Eigen::Index TrainingSet::dim() const { return features.empty() ? 0 : features.front().size(); }

std::vector<std::string> TrainingSet::classes() const {
  std::vector<std::string> out = labels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Standardizer Standardizer::fit(const std::vector<Eigen::VectorXd>& data) {
  const Eigen::Index d = data.front().size();
  const double n = static_cast<double>(data.size());
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(d);
  for (const auto& y : data) s.mean += y;
  s.mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& y : data) var += (y - s.mean).cwiseAbs2();
  var /= n;
  s.scale = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i) s.scale[i] = std::max(s.scale[i], kScaleFloor);
  return s;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& y) const {
  return (y - mean).cwiseQuotient(scale);
}

Eigen::VectorXd expand_basis(const Eigen::VectorXd& z, FeatureBasis basis) {
  if (basis == FeatureBasis::Linear) return z;
  const Eigen::Index d = z.size();
  Eigen::VectorXd out(d + d * (d + 1) / 2);
  out.head(d) = z;
  Eigen::Index idx = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) out[idx++] = z[i] * z[j];
  }
  return out;
}

LogisticSelector LogisticSelector::constant(std::string label, Eigen::Index dim) {
  LogisticSelector s;
  s.classes_.push_back(std::move(label));
  s.input_dim_ = dim;
  s.standardizer_.mean = Eigen::VectorXd::Zero(dim);
  s.standardizer_.scale = Eigen::VectorXd::Ones(dim);
  return s;
}

LogisticSelector LogisticSelector::from_parts(std::vector<std::string> classes,
                                              std::vector<Eigen::VectorXd> weights,
                                              Standardizer standardizer, SelectorOptions options,
                                              Eigen::Index input_dim) {
  LogisticSelector s;
  s.classes_ = std::move(classes);
  s.weights_ = std::move(weights);
  s.standardizer_ = std::move(standardizer);
  s.options_ = options;
  s.input_dim_ = input_dim;
  return s;
}

Eigen::VectorXd LogisticSelector::design(const Eigen::VectorXd& y) const {
  if (y.size() != input_dim_) {
    throw DimensionMismatchError("feature has dimension " + std::to_string(y.size()) +
                                 ", selector expects " + std::to_string(input_dim_));
  }
  const Eigen::VectorXd phi = expand_basis(standardizer_.apply(y), options_.basis);
  Eigen::VectorXd x(phi.size() + 1);
  x.head(phi.size()) = phi;
  x[phi.size()] = 1.0;
  return x;
}

std::vector<double> LogisticSelector::predict(const Eigen::VectorXd& y) const {
  if (is_constant()) {
    if (y.size() != input_dim_) {
      throw DimensionMismatchError("feature dimension mismatch for constant selector");
    }
    return {1.0};
  }
  const Eigen::VectorXd x = design(y);
  std::vector<double> out;
  out.reserve(weights_.size());
  for (const auto& w : weights_) {
    const double t = x.dot(w);
    out.push_back(t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)));
  }
  return out;
}

std::size_t LogisticSelector::argmax(const Eigen::VectorXd& y) const {
  const auto scores = predict(y);
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

LogisticSelector fit_ovr_logistic(const TrainingSet& data, const SelectorOptions& options) {
  const auto classes = data.classes();
  if (classes.size() < 2) {
    throw DegenerateLabelsError("one-vs-rest fit needs at least two classes");
  }

  // Canonical point order makes the fit independent of insertion order.
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.labels[a] != data.labels[b]) return data.labels[a] < data.labels[b];
    const auto& fa = data.features[a];
    const auto& fb = data.features[b];
    return std::lexicographical_compare(fa.data(), fa.data() + fa.size(), fb.data(),
                                        fb.data() + fb.size());
  });

  LogisticSelector sel;
  sel.classes_ = classes;
  sel.options_ = options;
  sel.input_dim_ = data.dim();
  sel.standardizer_ = Standardizer::fit(data.features);

  const Eigen::Index cols = sel.design(data.features.front()).size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), cols);
  std::vector<int> labels(data.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t m = order[r];
    x.row(static_cast<Eigen::Index>(r)) = sel.design(data.features[m]).transpose();
    labels[r] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), data.labels[m]) -
                                 classes.begin());
  }

  LogisticProblem problem{&x, options.lambda, options.max_iterations, options.gradient_tolerance};
  sel.weights_ = kernels::fit_one_vs_rest(problem, labels, static_cast<int>(classes.size()),
                                          options.policy);
  return sel;
}

LogisticSelector fit_selector(const TrainingSet& data, const SelectorOptions& options) {
  const auto classes = data.classes();
  if (classes.empty()) throw ClassifyError("cannot fit a selector on an empty training set");
  if (classes.size() == 1) {
    auto s = LogisticSelector::constant(classes.front(), data.dim());
    return LogisticSelector::from_parts(s.classes(), {}, s.standardizer(), options, data.dim());
  }
  return fit_ovr_logistic(data, options);
}

std::pair<LogisticSelector, TrainingSet> add_point_and_refit(const LogisticSelector& selector,
                                                             TrainingSet data,
                                                             Eigen::VectorXd y,
                                                             std::string label) {
  data.add(std::move(y), std::move(label));
  return {fit_selector(data, selector.options()), std::move(data)};
}

double gaussian_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  if (y.size() != mean.size()) throw DimensionMismatchError("density dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ClassifyError("covariance is not positive definite");
  const Eigen::VectorXd z = llt.matrixL().solve(y - mean);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (z.squaredNorm() + log_det + static_cast<double>(y.size()) * std::log(2.0 * M_PI));
}

GaussianPrecondition fit_gaussian_precondition(const TrainingSet& data) {
  GaussianPrecondition model;
  model.classes = data.classes();
  const Eigen::Index d = data.dim();
  for (const auto& c : model.classes) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    double n = 0;
    for (std::size_t m = 0; m < data.size(); ++m) {
      if (data.labels[m] == c) {
        mean += data.features[m];
        n += 1;
      }
    }
    mean /= n;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t m = 0; m < data.size(); ++m) {
      if (data.labels[m] == c) {
        const Eigen::VectorXd diff = data.features[m] - mean;
        cov += diff * diff.transpose();
      }
    }
    cov /= n;
    cov += kPreconditionFloor * Eigen::MatrixXd::Identity(d, d);
    model.means.push_back(std::move(mean));
    model.covariances.push_back(std::move(cov));
  }
  return model;
}

std::vector<double> GaussianPrecondition::log_densities(const Eigen::VectorXd& y) const {
  std::vector<double> out;
  out.reserve(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    out.push_back(gaussian_log_density(y, means[k], covariances[k]));
  }
  return out;
}

std::size_t GaussianPrecondition::predict_index(const Eigen::VectorXd& y) const {
  const auto ll = log_densities(y);
  return static_cast<std::size_t>(std::max_element(ll.begin(), ll.end()) - ll.begin());
}

std::string GaussianPrecondition::predict(const Eigen::VectorXd& y) const {
  return classes[predict_index(y)];
}

}  // namespace skillnet
