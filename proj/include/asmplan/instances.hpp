// Procedural desk-scale assembly instances and instance validation.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asmplan/kinematics.hpp"

namespace asmplan {

struct WorkspaceBounds {
  Vec3 lo{-3.0, -3.0, 0.0};
  Vec3 hi{3.0, 3.0, 2.5};
};

// Clearance margins of the lift and handover predicates; the paper-level
// semantics only require positive distances, so these are instance data.
struct ClearanceMargins {
  double lift = 0.5;         // part must rise this far above its storage pose
  double handover_z = 0.3;   // receiving gripper height above the target
  double handover_xy = 0.2;  // horizontal alignment box around the target
};

struct AssemblyInstance {
  std::string name;
  int schema_version = 1;
  std::vector<Part> parts;
  std::vector<RobotModel> robots;  // [crane, placing robot]
  WorkspaceBounds workspace;
  double ground_height = 0.0;
  double adjacency_tol = 1e-3;
  ClearanceMargins margins;
  Eigen::VectorXd home_q;

  const Part& part(const std::string& id) const;
  KinematicTree make_tree() const;
  // All robots at home_q; parts at storage except placed_at_start ones,
  // which sit at their targets.
  Configuration start_configuration() const;
};

RobotModel default_crane(const WorkspaceBounds& ws);
RobotModel default_mobile_robot(const WorkspaceBounds& ws);

// n_parts boxes with jittered extents arranged in a closed ring of radius
// `radius`, each touching its two ring neighbors within the adjacency
// tolerance; storage in a depot strip outside the footprint.
AssemblyInstance generate_ring(int n_parts, double radius, std::uint64_t seed);

// Running-bond brick wall; row r rests on row r-1, ground row on the ground.
AssemblyInstance generate_wall(int rows, int cols, std::uint64_t seed);

// Reference 24-part instance: two stacked 12-part rings, depot outside,
// placing robot starting inside the footprint.
AssemblyInstance generate_pavilion(std::uint64_t seed);

// Two pre-placed 2 m wall slabs with a 0.4 m corridor between them; the
// placing robot starts on the far side of the parts' targets.
AssemblyInstance generate_corridor(std::uint64_t seed);

// Empty = valid; otherwise human-readable violations.
std::vector<std::string> validate(const AssemblyInstance& instance);

}  // namespace asmplan
