// Static-stability scoring of placement candidates: neighbor counting and
// interface-wrench equilibrium, plus the epsilon-scheduled selection rule
// that decides when the best candidate proceeds to pose optimization.
#pragma once

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asmplan/geometry.hpp"
#include "asmplan/symbolic.hpp"

namespace asmplan {

struct AssemblyInstance;

struct NeighborGraph {
  std::map<std::string, std::set<std::string>> adjacency;
  std::set<std::string> ground_contacts;

  bool adjacent(const std::string& a, const std::string& b) const {
    auto it = adjacency.find(a);
    return it != adjacency.end() && it->second.count(b) > 0;
  }
};

// Parts a, b are neighbors iff their signed distance at the target poses is
// within tol; ground contacts by the same rule against the ground plane.
NeighborGraph build_neighbor_graph(const AssemblyInstance& instance, double tol);

// Negated average number of already-placed neighbors over the newly placed
// set W. Lower is better. Throws on empty W.
double placed_neighbor_score(const std::set<std::string>& placed,
                             const std::set<std::string>& newly_placed,
                             const NeighborGraph& graph);

struct InterfaceWrench {
  std::string part_a;
  std::string part_b;  // "" when the interface is against the ground
  Vec3 centroid;       // world point the wrench is expressed at
  Vec3 force;          // acting on part_a from part_b / ground
  Vec3 torque;
};

struct EquilibriumSolution {
  std::vector<InterfaceWrench> wrenches;
  double residual = 0.0;
};

inline constexpr double kGravity = 9.81;

// Minimum-norm interface wrenches balancing gravity for every part of
// `assembly` (parts at their target poses). nullopt = statically infeasible.
std::optional<EquilibriumSolution> solve_equilibrium(
    const std::set<std::string>& assembly, const NeighborGraph& graph,
    const AssemblyInstance& instance, const Vec3& gravity = Vec3(0, 0, -kGravity));

// Average part-part interface torque magnitude over the assembly placed so
// far plus the newly placed parts; +infinity when statically infeasible.
double static_torque_score(const std::set<std::string>& placed,
                           const std::set<std::string>& newly_placed,
                           const NeighborGraph& graph,
                           const AssemblyInstance& instance);

inline double infeasible_score() { return std::numeric_limits<double>::infinity(); }

enum class StabilityObjective { none, neighbors, statics };

// Sum of the per-placement scores over a skeleton's place actions, starting
// from the placed set of the state the skeleton was enumerated from.
double skeleton_stability_score(const Skeleton& skeleton,
                                const std::set<std::string>& placed_before,
                                StabilityObjective objective,
                                const NeighborGraph& graph,
                                const AssemblyInstance& instance);

struct StabilitySearchConfig {
  double epsilon0 = 0.5;
  int min_candidates = 5;
  std::int64_t expansion_budget = 500000;

  double epsilon(int n_found) const {
    return epsilon0 / (1.0 + n_found - min_candidates);
  }
};

struct ScoredCandidate {
  Skeleton skeleton;
  double score = 0.0;
};

struct Selection {
  bool proceed = false;     // false: grow the candidate set further
  int best_index = -1;      // valid when proceed
  bool suboptimal = false;  // true when forced by budget exhaustion
};

// Decides between proceeding with the best candidate and expanding the set.
// `can_expand` is false once the enumeration budget is exhausted or the
// space is fully explored; the best found is then returned as suboptimal.
Selection select_candidate(const std::vector<ScoredCandidate>& candidates,
                           const StabilitySearchConfig& cfg, bool can_expand);

}  // namespace asmplan
