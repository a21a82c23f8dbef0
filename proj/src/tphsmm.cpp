#include "skillnet/tphsmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace skillnet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_or_neg_inf(double p) { return p > 0 ? std::log(p) : kNegInf; }

double duration_log_density(const DurationModel& d, int length) {
  const double z = (static_cast<double>(length) - d.mean) / d.stddev;
  return -0.5 * z * z - std::log(d.stddev) - 0.5 * std::log(2.0 * M_PI);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

StateVector robot_state(const WorldState& s) {
  StateVector x;
  x << s.robot.position, s.robot.yaw(), s.gripper_closed ? 1.0 : 0.0;
  return x;
}

StateFrame StateFrame::from(const Frame& f) {
  StateFrame out;
  out.A.topLeftCorner<3, 3>() = f.rotation;
  out.b.head<3>() = f.origin;
  out.b[3] = f.yaw();
  return out;
}

StateVector StateFrame::project(const StateVector& x) const {
  StateVector local = A.transpose() * (x - b);
  local[3] = wrap_angle(local[3]);
  return local;
}

Eigen::VectorXd full_state_feature(const WorldState& s) {
  Eigen::VectorXd v(kTransformSize * static_cast<Eigen::Index>(1 + s.objects.size()));
  auto put = [&](Eigen::Index block, const Pose& p) {
    v.segment<3>(kTransformSize * block) = p.position;
    v.segment<4>(kTransformSize * block + 3) << p.orientation.w(), p.orientation.x(),
        p.orientation.y(), p.orientation.z();
  };
  put(0, s.robot);
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    put(static_cast<Eigen::Index>(i + 1), s.objects[i].pose);
  }
  return v;
}

std::vector<std::string> SkillModel::branch_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : branches) ids.push_back(id);
  return ids;
}

Eigen::VectorXd SkillModel::feature(const WorldState& s) const {
  if (feature_mode == FeatureMode::FullState) return full_state_feature(s);
  return skill_feature(frames.frames(s));
}

BranchModel fit_branch(const std::vector<const Demonstration*>& demos, const FrameSpec& frames,
                       const SkillFitOptions& options, EmTrace* trace) {
  const int k_count = options.components;
  const std::size_t n_frames = frames.entities.size();
  Eigen::Index n_total = 0;
  for (const auto* d : demos) {
    if (d->steps.size() < 2 || static_cast<int>(d->steps.size()) < k_count) {
      throw SkillModelError("demonstration of '" + d->skill + "' has " +
                            std::to_string(d->steps.size()) + " steps, needs at least " +
                            std::to_string(std::max(2, k_count)));
    }
    n_total += static_cast<Eigen::Index>(d->steps.size());
  }

  // Project every demo into the frames instantiated at its initial state.
  std::vector<Eigen::MatrixXd> data(n_frames, Eigen::MatrixXd(n_total, kStateDim));
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n_total, k_count);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  Eigen::Index row = 0;
  for (const auto* d : demos) {
    const auto demo_frames = frames.frames(d->steps.front());
    const auto len = static_cast<Eigen::Index>(d->steps.size());
    spans.emplace_back(row, len);
    for (Eigen::Index t = 0; t < len; ++t) {
      const StateVector x = robot_state(d->steps[static_cast<std::size_t>(t)]);
      for (std::size_t p = 0; p < n_frames; ++p) {
        data[p].row(row + t) = StateFrame::from(demo_frames[p]).project(x).transpose();
      }
      // Equal-time partition initialisation.
      const auto k = static_cast<Eigen::Index>((t * k_count) / len);
      resp(row + t, k) = 1.0;
    }
    row += len;
  }

  const Eigen::MatrixXd floor =
      options.covariance_floor * Eigen::MatrixXd::Identity(kStateDim, kStateDim);
  std::vector<double> priors(static_cast<std::size_t>(k_count));
  std::vector<std::vector<Eigen::VectorXd>> means(static_cast<std::size_t>(k_count));
  std::vector<std::vector<Eigen::MatrixXd>> covs(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    means[k].assign(n_frames, Eigen::VectorXd::Zero(kStateDim));
    covs[k].assign(n_frames, floor);
  }

  auto m_step = [&] {
    for (int k = 0; k < k_count; ++k) {
      const double nk = resp.col(k).sum();
      priors[k] = nk / static_cast<double>(n_total);
      if (nk < 1e-12) continue;  // keep the previous parameters of an empty component
      for (std::size_t p = 0; p < n_frames; ++p) {
        const Eigen::VectorXd mu = data[p].transpose() * resp.col(k) / nk;
        const Eigen::MatrixXd centered = data[p].rowwise() - mu.transpose();
        Eigen::MatrixXd cov =
            centered.transpose() * resp.col(k).asDiagonal() * centered / nk + floor;
        means[k][p] = mu;
        covs[k][p] = 0.5 * (cov + cov.transpose());
      }
    }
    for (auto& p : priors) p = std::max(p, 1e-300);
  };

  m_step();
  double prev_ll = kNegInf;
  for (int it = 0; it < options.em_iterations; ++it) {
    const Eigen::MatrixXd logl =
        kernels::component_log_likelihoods(data, priors, means, covs, options.policy);
    double ll = 0.0;
    for (Eigen::Index t = 0; t < n_total; ++t) {
      const double lse = log_sum_exp(logl.row(t).transpose());
      ll += lse;
      resp.row(t) = (logl.row(t).array() - lse).exp();
    }
    if (trace) trace->log_likelihood.push_back(ll);
    if (it > 0 && std::abs(ll - prev_ll) <= options.em_tolerance * std::max(1.0, std::abs(ll))) {
      break;
    }
    prev_ll = ll;
    m_step();
  }

  BranchModel model;
  for (int k = 0; k < k_count; ++k) {
    model.components.push_back({priors[k], means[k], covs[k]});
  }
  const double prior_sum = std::accumulate(priors.begin(), priors.end(), 0.0);
  for (auto& c : model.components) c.prior /= prior_sum;

  // Durations and transitions from the max-responsibility segmentation.
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k_count, k_count);
  Eigen::VectorXd initial = Eigen::VectorXd::Zero(k_count);
  std::vector<std::vector<int>> runs(static_cast<std::size_t>(k_count));
  for (const auto& [start, len] : spans) {
    int current = -1;
    int length = 0;
    for (Eigen::Index t = 0; t < len; ++t) {
      Eigen::Index k;
      resp.row(start + t).maxCoeff(&k);
      if (static_cast<int>(k) == current) {
        ++length;
        continue;
      }
      if (current >= 0) {
        runs[current].push_back(length);
        counts(current, k) += 1.0;
      } else {
        initial[k] += 1.0;
      }
      current = static_cast<int>(k);
      length = 1;
    }
    runs[current].push_back(length);
  }

  model.transitions = Eigen::MatrixXd::Zero(k_count, k_count);
  for (int h = 0; h < k_count; ++h) {
    const double total = counts.row(h).sum();
    if (total > 0) {
      model.transitions.row(h) = counts.row(h) / total;
    } else {
      model.transitions(h, h) = 1.0;
    }
  }
  model.initial = initial / initial.sum();

  double mean_len = 0.0;
  for (const auto& [_, len] : spans) mean_len += static_cast<double>(len);
  mean_len /= static_cast<double>(spans.size() * static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    DurationModel d{mean_len, kDurationStddevFloor};
    if (!runs[k].empty()) {
      const double n = static_cast<double>(runs[k].size());
      d.mean = std::accumulate(runs[k].begin(), runs[k].end(), 0.0) / n;
      double var = 0.0;
      for (int r : runs[k]) var += (r - d.mean) * (r - d.mean);
      d.stddev = std::max(kDurationStddevFloor, std::sqrt(var / n));
    }
    model.durations.push_back(d);
  }
  return model;
}

SkillModel fit_skill_model(const std::string& name, const std::vector<Demonstration>& demos,
                           const std::vector<std::string>& branches, const FrameSpec& frames,
                           const std::vector<std::string>& objects,
                           const SkillFitOptions& options) {
  if (frames.entities.size() < 2) throw SkillModelError("skill needs at least two frames");
  SkillModel model;
  model.name = name;
  model.frames = frames;
  model.objects = objects;
  model.feature_mode = options.feature_mode;

  for (const auto& d : demos) {
    if (std::find(branches.begin(), branches.end(), d.branch) == branches.end()) {
      throw SkillModelError("demonstration carries unknown branch '" + d.branch + "'");
    }
  }
  for (const auto& b : branches) {
    std::vector<const Demonstration*> subset;
    for (const auto& d : demos) {
      if (d.branch == b) subset.push_back(&d);
    }
    if (subset.empty()) throw SkillModelError("branch '" + b + "' has no demonstration");
    model.branches.emplace(b, fit_branch(subset, frames, options));
  }
  for (const auto& d : demos) model.branch_data.add(model.feature(d.steps.front()), d.branch);
  model.branch_selector = fit_selector(model.branch_data, options.selector);
  return model;
}

BranchChoice select_branch(const SkillModel& model, const WorldState& s, double lower_bound) {
  BranchChoice out;
  out.branches = model.branch_selector.classes();
  out.scores = model.branch_selector.predict(model.feature(s));
  double best = -1.0;
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (out.scores[i] > lower_bound && out.scores[i] > best) {
      best = out.scores[i];
      out.best = out.branches[i];
    }
  }
  return out;
}

GlobalGmm global_gmm(const BranchModel& branch, const std::vector<Frame>& frames) {
  GlobalGmm out;
  for (const auto& comp : branch.components) {
    if (comp.means.size() != frames.size()) {
      throw SkillModelError("frame count does not match the skill's frame spec");
    }
    Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(kStateDim, kStateDim);
    Eigen::VectorXd info = Eigen::VectorXd::Zero(kStateDim);
    for (std::size_t p = 0; p < frames.size(); ++p) {
      const StateFrame f = StateFrame::from(frames[p]);
      const Eigen::VectorXd mu = f.A * comp.means[p] + f.b;
      const Eigen::MatrixXd sigma = f.A * comp.covariances[p] * f.A.transpose();
      const Eigen::MatrixXd lambda = sigma.inverse();
      precision += lambda;
      info += lambda * mu;
    }
    precision = 0.5 * (precision + precision.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
      precision += kCovarianceFloor * Eigen::MatrixXd::Identity(kStateDim, kStateDim);
      llt.compute(precision);
      out.regularized = true;
    }
    GlobalGaussian g;
    g.covariance = llt.solve(Eigen::MatrixXd::Identity(kStateDim, kStateDim));
    g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
    g.mean = llt.solve(info);
    out.gaussians.push_back(std::move(g));
  }
  return out;
}

std::vector<double> boundary_loglik(const GlobalGmm& gmm, const StateVector& x) {
  std::vector<double> out;
  out.reserve(gmm.gaussians.size());
  for (const auto& g : gmm.gaussians) {
    out.push_back(gaussian_log_density(x, g.mean, g.covariance));
  }
  return out;
}

ComponentSequence viterbi_components(const BranchModel& model, int horizon,
                                     const std::vector<double>* start_loglik,
                                     const std::vector<double>* goal_loglik) {
  const int k_count = model.size();
  if (horizon < k_count) {
    throw SkillModelError("horizon " + std::to_string(horizon) + " shorter than " +
                          std::to_string(k_count) + " components");
  }
  const int t_max = horizon;

  // best[t][k]: best score of a segmentation of steps [0, t) whose last
  // segment has component k and ends exactly at t.
  std::vector<std::vector<double>> best(t_max + 1, std::vector<double>(k_count, kNegInf));
  std::vector<std::vector<std::pair<int, int>>> back(
      t_max + 1, std::vector<std::pair<int, int>>(k_count, {-1, -1}));  // (duration, prev)

  std::vector<std::vector<double>> log_dur(k_count, std::vector<double>(t_max + 1, kNegInf));
  for (int k = 0; k < k_count; ++k) {
    for (int d = 1; d <= t_max; ++d) log_dur[k][d] = duration_log_density(model.durations[k], d);
  }

  for (int t = 1; t <= t_max; ++t) {
    for (int k = 0; k < k_count; ++k) {
      for (int d = 1; d <= t; ++d) {
        const int s = t - d;
        if (s == 0) {
          double score = log_or_neg_inf(model.initial[k]) + log_dur[k][d];
          if (start_loglik) score += (*start_loglik)[k];
          if (score > best[t][k]) {
            best[t][k] = score;
            back[t][k] = {d, -1};
          }
          continue;
        }
        for (int h = 0; h < k_count; ++h) {
          if (best[s][h] == kNegInf) continue;
          const double score = best[s][h] + log_or_neg_inf(model.transitions(h, k)) + log_dur[k][d];
          if (score > best[t][k]) {
            best[t][k] = score;
            back[t][k] = {d, h};
          }
        }
      }
    }
  }

  int last = -1;
  double total = kNegInf;
  for (int k = 0; k < k_count; ++k) {
    double score = best[t_max][k];
    if (goal_loglik && score != kNegInf) score += (*goal_loglik)[k];
    if (score > total) {
      total = score;
      last = k;
    }
  }
  if (last < 0) throw SkillModelError("no feasible component sequence for the horizon");

  ComponentSequence seq;
  seq.log_score = total;
  seq.indices.resize(static_cast<std::size_t>(t_max));
  int t = t_max;
  int k = last;
  while (t > 0) {
    const auto [d, prev] = back[t][k];
    for (int i = t - d; i < t; ++i) seq.indices[static_cast<std::size_t>(i)] = k;
    t -= d;
    k = prev;
  }
  return seq;
}

int expected_horizon(const BranchModel& model) {
  const int k_count = model.size();
  std::vector<bool> visited(static_cast<std::size_t>(k_count), false);
  Eigen::Index k;
  model.initial.maxCoeff(&k);
  double total = 0.0;
  while (true) {
    visited[static_cast<std::size_t>(k)] = true;
    total += model.durations[static_cast<std::size_t>(k)].mean;
    int next = -1;
    double best = 0.0;
    for (int j = 0; j < k_count; ++j) {
      if (!visited[static_cast<std::size_t>(j)] && model.transitions(k, j) > best) {
        best = model.transitions(k, j);
        next = j;
      }
    }
    if (next < 0) break;
    k = next;
  }
  return std::max(k_count, static_cast<int>(std::lround(total)));
}

Trajectory lqg_retrieve(const std::vector<GlobalGaussian>& gaussians, const ComponentSequence& seq,
                        const StateVector& start, const LqgOptions& options) {
  constexpr int n = 2 * kStateDim;
  using Mat = Eigen::Matrix<double, n, n>;
  using Vec = Eigen::Matrix<double, n, 1>;
  using InMat = Eigen::Matrix<double, n, kStateDim>;
  const int horizon = seq.horizon();
  const double dt = options.dt;

  Mat a = Mat::Identity();
  a.topRightCorner<kStateDim, kStateDim>() = dt * StateMatrix::Identity();
  InMat b = InMat::Zero();
  b.topRows<kStateDim>() = 0.5 * dt * dt * StateMatrix::Identity();
  b.bottomRows<kStateDim>() = dt * StateMatrix::Identity();
  const StateMatrix r = options.control_weight * StateMatrix::Identity();

  std::vector<Mat> q(static_cast<std::size_t>(horizon + 1), Mat::Zero());
  std::vector<Vec> target(static_cast<std::size_t>(horizon + 1), Vec::Zero());
  for (int t = 1; t <= horizon; ++t) {
    const auto& g = gaussians.at(static_cast<std::size_t>(seq.indices[static_cast<std::size_t>(t - 1)]));
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
    if (llt.info() != Eigen::Success) {
      throw SkillModelError("tracking covariance is not positive definite");
    }
    q[t].topLeftCorner<kStateDim, kStateDim>() =
        llt.solve(Eigen::MatrixXd::Identity(kStateDim, kStateDim));
    target[t].head<kStateDim>() = g.mean;
  }

  // Value function V_t(x) = x^T P_t x - 2 p_t^T x + const.
  std::vector<Mat> p_mat(static_cast<std::size_t>(horizon + 1));
  std::vector<Vec> p_vec(static_cast<std::size_t>(horizon + 1));
  p_mat[horizon] = q[horizon];
  p_vec[horizon] = q[horizon] * target[horizon];
  std::vector<Eigen::Matrix<double, kStateDim, n>> gain(static_cast<std::size_t>(horizon));
  std::vector<StateVector> offset(static_cast<std::size_t>(horizon));
  for (int t = horizon - 1; t >= 0; --t) {
    const Mat& s = p_mat[t + 1];
    const Vec& sv = p_vec[t + 1];
    const StateMatrix h = r + b.transpose() * s * b;
    const Eigen::LLT<StateMatrix> hl(h);
    gain[t] = -hl.solve(b.transpose() * s * a);
    offset[t] = hl.solve(b.transpose() * sv);
    const Mat closed = a + b * gain[t];
    p_mat[t] = q[t] + a.transpose() * s * closed;
    p_mat[t] = 0.5 * (p_mat[t] + p_mat[t].transpose()).eval();
    p_vec[t] = q[t] * target[t] + closed.transpose() * sv;
  }

  Trajectory traj;
  Vec x = Vec::Zero();
  x.head<kStateDim>() = start;
  for (int t = 0; t < horizon; ++t) {
    const StateVector u = gain[t] * x + offset[t];
    x = a * x + b * u;
    traj.controls.push_back(u);
    traj.states.push_back(x.head<kStateDim>());
    traj.velocities.push_back(x.tail<kStateDim>());
    traj.gripper_closed.push_back(x[kStateDim - 1] > 0.5);
  }
  return traj;
}

Trajectory retrieve(const SkillModel& model, const std::string& branch, const WorldState& s,
                    const LqgOptions& options) {
  const auto it = model.branches.find(branch);
  if (it == model.branches.end()) {
    throw SkillModelError("skill '" + model.name + "' has no branch '" + branch + "'");
  }
  const GlobalGmm gmm = global_gmm(it->second, model.frames.frames(s));
  const StateVector x0 = robot_state(s);
  const auto start_ll = boundary_loglik(gmm, x0);
  const ComponentSequence seq =
      viterbi_components(it->second, expected_horizon(it->second), &start_ll, nullptr);
  return lqg_retrieve(gmm.gaussians, seq, x0, options);
}

}  // namespace skillnet
