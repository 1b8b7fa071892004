// First-order symbolic domain: pick / liftUp / handover / place operators,
// successor semantics and breadth-first enumeration of candidate action
// sequences for one subgoal.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace asmplan {

struct AssemblyInstance;  // instances.hpp
struct NeighborGraph;     // stability.hpp

enum class ActionOp { pick, lift_up, handover, place };

const char* to_string(ActionOp op);

struct Action {
  ActionOp op;
  std::vector<std::string> args;  // arity fixed per operator

  bool operator==(const Action& o) const { return op == o.op && args == o.args; }
  std::string str() const;
};

struct SymbolicState {
  std::set<std::string> placed;
  std::map<std::string, std::string> held;  // gripper (robot name) -> part
  std::set<std::string> lifted;
  int step_count = 0;

  bool grippers_empty() const { return held.empty(); }
};

struct Skeleton {
  std::vector<Action> actions;
  std::vector<SymbolicState> states;  // states[k] = result of actions[k]
  int K = 0;
};

struct GoalSpec {
  std::set<std::string> remaining;  // parts still to be placed at their target
};

// Context the symbolic layer needs about an instance: robots and which
// placements are currently allowed.
struct SymbolicContext {
  std::string crane;          // picking / lifting robot
  std::string placer;         // final-placement robot
  std::vector<std::string> parts;          // all part ids, sorted
  std::vector<uint32_t> part_neighbors;    // bitmask over `parts`
  uint32_t ground_supported = 0;           // bitmask
};

SymbolicContext make_symbolic_context(const AssemblyInstance& instance,
                                      const NeighborGraph& graph);

std::vector<Action> applicable_actions(const SymbolicState& s,
                                       const SymbolicContext& ctx);

// Applies `a` to `s`; throws std::invalid_argument when preconditions fail.
SymbolicState successor(const SymbolicState& s, const Action& a,
                        const SymbolicContext& ctx);

// True iff at least min(n_h, |g.remaining|) parts of g are placed and both
// grippers are empty.
bool satisfies_subgoal(const SymbolicState& s, const GoalSpec& g, int n_h);

// Resumable breadth-first enumeration. Duplicate states (placed, held,
// lifted) are pruned; every action strictly advances the per-part pipeline
// stage, so a state can only ever recur at its unique depth.
class SkeletonEnumerator {
 public:
  SkeletonEnumerator(const SymbolicState& s0, const GoalSpec& goal, int n_h,
                     const SymbolicContext& ctx, std::int64_t expansion_budget);

  // Next goal-satisfying skeleton in BFS order, or nullopt when the budget is
  // exhausted or the space is fully explored.
  std::optional<Skeleton> next();

  bool budget_exhausted() const { return exhausted_; }
  std::int64_t expansions() const { return expansions_; }

 private:
  struct PackedState {
    uint32_t placed = 0;
    uint32_t lifted = 0;
    int8_t crane_part = -1;   // part index or -1
    int8_t placer_part = -1;
    bool operator==(const PackedState& o) const {
      return placed == o.placed && lifted == o.lifted &&
             crane_part == o.crane_part && placer_part == o.placer_part;
    }
  };
  struct Hash {
    size_t operator()(const PackedState& s) const {
      uint64_t x = s.placed | (uint64_t(s.lifted) << 32);
      x ^= (uint64_t(uint8_t(s.crane_part)) << 1) * 0x9e3779b97f4a7c15ull;
      x ^= (uint64_t(uint8_t(s.placer_part)) << 17) * 0xbf58476d1ce4e5b9ull;
      x ^= x >> 31;
      return static_cast<size_t>(x * 0x94d049bb133111ebull);
    }
  };
  struct Node {
    PackedState state;
    int parent = -1;
    // Action encoding: op in low 2 bits, part index above.
    uint16_t action = 0;
  };

  bool is_goal(const PackedState& s) const;
  Skeleton materialize(int node_index) const;

  const SymbolicContext& ctx_;
  int n_parts_ = 0;
  uint32_t goal_mask_ = 0;
  uint32_t initially_placed_ = 0;
  int needed_ = 0;
  std::int64_t budget_ = 0;
  std::int64_t expansions_ = 0;
  bool exhausted_ = false;
  SymbolicState s0_;
  std::vector<Node> arena_;
  std::unordered_map<PackedState, int, Hash> visited_;
  size_t cursor_ = 0;          // BFS queue position into arena_
  size_t emit_cursor_ = 0;     // next arena node to test for goal emission
};

}  // namespace asmplan
