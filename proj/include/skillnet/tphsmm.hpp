#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "skillnet/classify.hpp"
#include "skillnet/geometry.hpp"

namespace skillnet {

class SkillModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Skill state: position (3), yaw, gripper (0 open / 1 closed).
inline constexpr int kStateDim = 5;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;

StateVector robot_state(const WorldState& s);

/// Affine map of a frame acting on skill states: x_global = A x_local + b.
struct StateFrame {
  StateMatrix A = StateMatrix::Identity();
  StateVector b = StateVector::Zero();

  static StateFrame from(const Frame& f);
  /// A^T (x - b), with the yaw difference wrapped into (-pi, pi].
  StateVector project(const StateVector& x) const;
};

/// How selector features are computed from world states.
enum class FeatureMode {
  Relative,   // chained frame-relative transforms
  FullState,  // absolute poses of every entity
};

/// Absolute poses of the robot and every object, 7 entries each.
Eigen::VectorXd full_state_feature(const WorldState& s);

struct Demonstration {
  std::string skill;
  std::string branch;
  std::vector<WorldState> steps;
};

struct TPGMMComponent {
  double prior = 0.0;
  std::vector<Eigen::VectorXd> means;        // one per frame
  std::vector<Eigen::MatrixXd> covariances;  // one per frame
};

struct DurationModel {
  double mean = 1.0;    // time steps
  double stddev = 0.5;  // time steps
};

/// HSMM of one branch: components, row-stochastic transitions, initial
/// component distribution and per-component duration Gaussians.
struct BranchModel {
  std::vector<TPGMMComponent> components;
  Eigen::MatrixXd transitions;
  Eigen::VectorXd initial;
  std::vector<DurationModel> durations;

  int size() const { return static_cast<int>(components.size()); }
};

struct SkillModel {
  std::string name;
  FrameSpec frames;
  /// Objects whose poses matter to the skill (O_a).
  std::vector<std::string> objects;
  std::map<std::string, BranchModel> branches;
  LogisticSelector branch_selector;
  TrainingSet branch_data;
  FeatureMode feature_mode = FeatureMode::Relative;

  std::vector<std::string> branch_ids() const;
  /// Selector feature v of a state (Relative: frame chain; FullState: absolute).
  Eigen::VectorXd feature(const WorldState& s) const;
};

inline constexpr double kCovarianceFloor = 1e-4;
inline constexpr double kDurationStddevFloor = 0.5;

struct SkillFitOptions {
  int components = 5;
  double covariance_floor = kCovarianceFloor;
  int em_iterations = 100;
  double em_tolerance = 1e-10;
  SelectorOptions selector;
  FeatureMode feature_mode = FeatureMode::Relative;
  ExecPolicy policy = ExecPolicy::Parallel;
};

struct EmTrace {
  std::vector<double> log_likelihood;
};

/// Joint TP-GMM EM over frame-projected data of one branch.
BranchModel fit_branch(const std::vector<const Demonstration*>& demos, const FrameSpec& frames,
                       const SkillFitOptions& options, EmTrace* trace = nullptr);

SkillModel fit_skill_model(const std::string& name, const std::vector<Demonstration>& demos,
                           const std::vector<std::string>& branches, const FrameSpec& frames,
                           const std::vector<std::string>& objects,
                           const SkillFitOptions& options = {});

struct BranchChoice {
  std::vector<std::string> branches;
  std::vector<double> scores;
  std::optional<std::string> best;  // empty: no branch above the bound
};

BranchChoice select_branch(const SkillModel& model, const WorldState& s, double lower_bound);

struct GlobalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GlobalGmm {
  std::vector<GlobalGaussian> gaussians;
  bool regularized = false;  // a fused precision needed the floor
};

/// Precision-weighted product of the frame-transformed component Gaussians.
GlobalGmm global_gmm(const BranchModel& branch, const std::vector<Frame>& frames);

struct ComponentSequence {
  std::vector<int> indices;
  double log_score = 0.0;

  int horizon() const { return static_cast<int>(indices.size()); }
};

/// Segmental Viterbi over transitions and durations with optional boundary
/// log-likelihoods (per component) for the first and last segments.
ComponentSequence viterbi_components(const BranchModel& model, int horizon,
                                     const std::vector<double>* start_loglik = nullptr,
                                     const std::vector<double>* goal_loglik = nullptr);

/// Boundary log-likelihoods of a state under each global component.
std::vector<double> boundary_loglik(const GlobalGmm& gmm, const StateVector& x);

/// Rounded sum of mean durations along the most likely component path.
int expected_horizon(const BranchModel& model);

struct LqgOptions {
  double dt = 0.05;
  double control_weight = 1e-2;
};

struct Trajectory {
  std::vector<StateVector> states;    // x_1 .. x_T
  std::vector<StateVector> velocities;
  std::vector<StateVector> controls;  // u_0 .. u_{T-1}
  std::vector<bool> gripper_closed;

  std::size_t size() const { return states.size(); }
  const StateVector& final_state() const { return states.back(); }
};

/// Finite-horizon LQ tracking of the Gaussian sequence with a double
/// integrator per state dimension, solved by backward Riccati recursion.
Trajectory lqg_retrieve(const std::vector<GlobalGaussian>& gaussians, const ComponentSequence& seq,
                        const StateVector& start, const LqgOptions& options = {});

/// Full retrieval for one branch in a given scene.
Trajectory retrieve(const SkillModel& model, const std::string& branch, const WorldState& s,
                    const LqgOptions& options = {});

}  // namespace skillnet
