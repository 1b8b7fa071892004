// Feature-based constrained trajectory optimization over a time-discretized
// path with kinematic mode switches, solved by an augmented-Lagrangian method
// with Gauss-Newton inner iterations. Realizes the pose / switch-sequence /
// full-path relaxations of one skeleton.
#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <string>
#include <vector>

#include "asmplan/instances.hpp"
#include "asmplan/stability.hpp"
#include "asmplan/symbolic.hpp"

namespace asmplan {

enum class BoundKind { pose, sequence, full_path };

const char* to_string(BoundKind k);

struct PhaseSpec {
  double T = 1.0;  // phase duration, seconds
  int n_t = 20;    // timesteps per phase in the full-path problem
};

struct NlpParams {
  double safety_margin = 0.01;   // soft clearance inside the optimizer
  double contact_margin = 2e-4;  // clearance near designed contacts
  double revolute_weight = 0.5;  // joint-space metric weight of revolute joints
  double accel_weight = 1.0;
};

enum class RowClass : std::uint8_t { sos, eq, ineq };

struct Evaluation {
  Eigen::VectorXd value;
  std::vector<Eigen::Triplet<double>> triplets;  // Jacobian w.r.t. free knots
  bool finite = true;
};

class CompiledProblem {
 public:
  struct Event {
    int knot = 0;  // attachment applies to knots strictly after this one
    int part = -1;
    int old_frame = -1;  // -1: world
    int new_frame = -1;
  };
  struct TouchFeature {
    int knot, body_a, part, row;
  };
  struct FitPoseFeature {
    int knot, part, row;
    Pose target;
  };
  struct PostLiftFeature {
    int knot, part, row;
    double min_z;
  };
  struct PreHandoverFeature {
    int knot, gripper_body, row;
    Vec3 target;
    double dz, dxy;
  };
  struct PairFeature {
    int body_a, body_b, row0;
    std::vector<double> margin;  // per knot; NaN = exempt at that knot
  };

  const KinematicTree* tree = nullptr;
  BoundKind kind = BoundKind::sequence;
  PhaseSpec phases;
  NlpParams params;
  int K = 0;
  int n_knots = 1;
  int dof = 0;
  bool knot0_frozen = false;
  double dt = 0.0;
  Eigen::VectorXd q0;            // knot 0 value (frozen for sequence/full)
  Eigen::VectorXd joint_weight;  // per-joint metric weights
  std::vector<Pose> static_part_pose;  // per part; used when it has no events
  std::vector<Event> events;           // ordered by knot
  std::vector<TouchFeature> touches;
  std::vector<FitPoseFeature> fit_poses;
  std::vector<PostLiftFeature> post_lifts;
  std::vector<PreHandoverFeature> pre_handovers;
  std::vector<PairFeature> pairs;
  std::vector<int> accel_knots;  // interior knots with an acceleration row block
  int accel_row0 = -1;
  int limits_row0 = -1;
  int n_rows = 0;
  std::vector<RowClass> row_class;

  int var_count() const { return (n_knots - (knot0_frozen ? 1 : 0)) * dof; }
  int var_offset(int knot) const {
    return knot0_frozen ? (knot - 1) * dof : knot * dof;
  }
  int switch_knot(int action_index_1based) const;

  // Evaluates all feature rows and their Jacobian at the given knot values.
  // When `exact_all` is set the AABB gate on collision rows is disabled
  // (used by the finite-difference checks).
  void evaluate(const std::vector<Eigen::VectorXd>& knots, Evaluation* out,
                bool exact_all = false) const;

  // World poses of every part at every knot, following the mode chain
  // through the given knot values.
  std::vector<std::vector<Pose>> part_poses(
      const std::vector<Eigen::VectorXd>& knots) const;
};

// Builds the trajectory problem of a skeleton. `start` supplies the initial
// joint vector and the world poses of all parts; every part must start
// world-attached.
CompiledProblem compile_trajectory(const KinematicTree& tree,
                                   const AssemblyInstance& instance,
                                   const NeighborGraph& graph,
                                   const Skeleton& skeleton,
                                   const Configuration& start, BoundKind kind,
                                   const PhaseSpec& phases,
                                   const NlpParams& params = NlpParams{});

struct SolverOptions {
  double eq_tol = 1e-4;
  double ineq_tol = 1e-4;
  int max_outer = 10;
  double mu0 = 1.0;
  double mu_growth = 10.0;
  int max_inner = 120;
  double step_tol = 1e-7;
  double time_cap_seconds = 30.0;
  bool record_iterates = false;
};

struct NLPResult {
  bool feasible = false;
  double cost = 0.0;
  std::vector<Eigen::VectorXd> solution;  // all knots, including knot 0
  double max_violation = 0.0;
  int iterations = 0;
  bool numeric_error = false;
  std::vector<Eigen::VectorXd> iterates;  // accepted steps when recording
};

NLPResult solve(const CompiledProblem& problem,
                const std::vector<Eigen::VectorXd>& init,
                const SolverOptions& opts = SolverOptions{});

// Initialization helpers.
std::vector<Eigen::VectorXd> constant_init(const CompiledProblem& problem,
                                           const Eigen::VectorXd& q);
// Per-phase linear interpolation of switch knots onto the full grid.
std::vector<Eigen::VectorXd> interpolate_switch_knots(
    const CompiledProblem& full_problem,
    const std::vector<Eigen::VectorXd>& seq_knots);

}  // namespace asmplan
