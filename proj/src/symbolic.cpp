#include "asmplan/symbolic.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "asmplan/instances.hpp"
#include "asmplan/stability.hpp"

namespace asmplan {

const char* to_string(ActionOp op) {
  switch (op) {
    case ActionOp::pick: return "pick";
    case ActionOp::lift_up: return "liftUp";
    case ActionOp::handover: return "handover";
    case ActionOp::place: return "place";
  }
  return "?";
}

std::string Action::str() const {
  std::string s = "(";
  s += to_string(op);
  for (const auto& a : args) s += " " + a;
  s += ")";
  return s;
}

SymbolicContext make_symbolic_context(const AssemblyInstance& instance,
                                      const NeighborGraph& graph) {
  SymbolicContext ctx;
  ctx.crane = instance.robots.at(0).name;
  ctx.placer = instance.robots.at(1).name;
  for (const auto& p : instance.parts) ctx.parts.push_back(p.id);
  std::sort(ctx.parts.begin(), ctx.parts.end());
  if (ctx.parts.size() > 32)
    throw std::invalid_argument("symbolic layer supports at most 32 parts");
  std::map<std::string, int> idx;
  for (size_t i = 0; i < ctx.parts.size(); ++i) idx[ctx.parts[i]] = static_cast<int>(i);
  ctx.part_neighbors.assign(ctx.parts.size(), 0);
  for (const auto& [a, ns] : graph.adjacency)
    for (const auto& b : ns) ctx.part_neighbors[idx.at(a)] |= 1u << idx.at(b);
  for (const auto& g : graph.ground_contacts) ctx.ground_supported |= 1u << idx.at(g);
  return ctx;
}

namespace {

int part_index(const SymbolicContext& ctx, const std::string& id) {
  auto it = std::lower_bound(ctx.parts.begin(), ctx.parts.end(), id);
  if (it == ctx.parts.end() || *it != id)
    throw std::invalid_argument("unknown part: " + id);
  return static_cast<int>(it - ctx.parts.begin());
}

bool placeable(const SymbolicContext& ctx, int part, uint32_t placed_mask) {
  return (ctx.part_neighbors[part] & placed_mask) != 0 ||
         (ctx.ground_supported >> part) & 1u;
}

uint32_t placed_mask_of(const SymbolicState& s, const SymbolicContext& ctx) {
  uint32_t m = 0;
  for (const auto& p : s.placed) m |= 1u << part_index(ctx, p);
  return m;
}

Action make_action(const SymbolicContext& ctx, ActionOp op, const std::string& part) {
  switch (op) {
    case ActionOp::pick: return Action{op, {ctx.crane, part}};
    case ActionOp::lift_up: return Action{op, {part, "storage(" + part + ")"}};
    case ActionOp::handover: return Action{op, {ctx.placer, part, "target(" + part + ")"}};
    case ActionOp::place: return Action{op, {part, "target(" + part + ")"}};
  }
  throw std::logic_error("bad op");
}

}  // namespace

std::vector<Action> applicable_actions(const SymbolicState& s,
                                       const SymbolicContext& ctx) {
  std::vector<Action> out;
  const auto crane_it = s.held.find(ctx.crane);
  const auto placer_it = s.held.find(ctx.placer);
  const bool crane_free = crane_it == s.held.end();
  const bool placer_free = placer_it == s.held.end();
  const uint32_t placed = placed_mask_of(s, ctx);

  if (crane_free) {
    for (const auto& p : ctx.parts) {
      if (s.placed.count(p)) continue;
      bool held = false;
      for (const auto& [g, h] : s.held) held |= h == p;
      if (held) continue;
      out.push_back(make_action(ctx, ActionOp::pick, p));
    }
  } else {
    const std::string& p = crane_it->second;
    if (!s.lifted.count(p)) {
      out.push_back(make_action(ctx, ActionOp::lift_up, p));
    } else if (placer_free) {
      out.push_back(make_action(ctx, ActionOp::handover, p));
    }
  }
  if (!placer_free) {
    const std::string& p = placer_it->second;
    if (placeable(ctx, part_index(ctx, p), placed))
      out.push_back(make_action(ctx, ActionOp::place, p));
  }
  return out;
}

SymbolicState successor(const SymbolicState& s, const Action& a,
                        const SymbolicContext& ctx) {
  SymbolicState n = s;
  n.step_count = s.step_count + 1;
  auto require = [&](bool cond, const char* what) {
    if (!cond)
      throw std::invalid_argument(std::string("inapplicable action ") + a.str() +
                                  ": " + what);
  };
  switch (a.op) {
    case ActionOp::pick: {
      require(a.args.size() == 2, "arity");
      const std::string& p = a.args[1];
      part_index(ctx, p);
      require(a.args[0] == ctx.crane, "only the crane picks");
      require(!s.held.count(ctx.crane), "crane occupied");
      require(!s.placed.count(p), "already placed");
      for (const auto& [g, h] : s.held) require(h != p, "part already held");
      n.held[ctx.crane] = p;
      break;
    }
    case ActionOp::lift_up: {
      require(a.args.size() == 2, "arity");
      const std::string& p = a.args[0];
      auto it = s.held.find(ctx.crane);
      require(it != s.held.end() && it->second == p, "crane does not hold part");
      require(!s.lifted.count(p), "already lifted");
      n.lifted.insert(p);
      break;
    }
    case ActionOp::handover: {
      require(a.args.size() == 3, "arity");
      const std::string& p = a.args[1];
      auto it = s.held.find(ctx.crane);
      require(it != s.held.end() && it->second == p, "crane does not hold part");
      require(s.lifted.count(p) > 0, "part not lifted");
      require(!s.held.count(ctx.placer), "receiving gripper occupied");
      n.held.erase(ctx.crane);
      n.held[ctx.placer] = p;
      break;
    }
    case ActionOp::place: {
      require(a.args.size() == 2, "arity");
      const std::string& p = a.args[0];
      auto it = s.held.find(ctx.placer);
      require(it != s.held.end() && it->second == p, "placer does not hold part");
      require(placeable(ctx, part_index(ctx, p), placed_mask_of(s, ctx)),
              "no placed neighbor and not ground supported");
      n.held.erase(ctx.placer);
      n.placed.insert(p);
      n.lifted.erase(p);
      break;
    }
  }
  return n;
}

bool satisfies_subgoal(const SymbolicState& s, const GoalSpec& g, int n_h) {
  if (n_h < 1) throw std::invalid_argument("n_h must be >= 1");
  if (!s.grippers_empty()) return false;
  int placed_from_goal = 0;
  for (const auto& p : g.remaining) placed_from_goal += s.placed.count(p) ? 1 : 0;
  const int needed = std::min<int>(n_h, static_cast<int>(g.remaining.size()));
  return placed_from_goal >= needed;
}

SkeletonEnumerator::SkeletonEnumerator(const SymbolicState& s0,
                                       const GoalSpec& goal, int n_h,
                                       const SymbolicContext& ctx,
                                       std::int64_t expansion_budget)
    : ctx_(ctx), s0_(s0), budget_(expansion_budget) {
  if (expansion_budget <= 0) throw std::invalid_argument("budget must be > 0");
  if (n_h < 1) throw std::invalid_argument("n_h must be >= 1");
  n_parts_ = static_cast<int>(ctx.parts.size());
  for (const auto& p : goal.remaining) goal_mask_ |= 1u << part_index(ctx, p);
  needed_ = std::min<int>(n_h, static_cast<int>(goal.remaining.size()));

  PackedState root;
  for (const auto& p : s0.placed) root.placed |= 1u << part_index(ctx, p);
  for (const auto& p : s0.lifted) root.lifted |= 1u << part_index(ctx, p);
  initially_placed_ = root.placed;
  for (const auto& [g, p] : s0.held) {
    if (g == ctx.crane) root.crane_part = static_cast<int8_t>(part_index(ctx, p));
    else if (g == ctx.placer) root.placer_part = static_cast<int8_t>(part_index(ctx, p));
    else throw std::invalid_argument("unknown gripper in state: " + g);
  }
  arena_.push_back(Node{root, -1, 0});
  visited_.emplace(root, 0);
}

bool SkeletonEnumerator::is_goal(const PackedState& s) const {
  if (s.crane_part >= 0 || s.placer_part >= 0) return false;
  return std::popcount(s.placed & goal_mask_) >= needed_;
}

Skeleton SkeletonEnumerator::materialize(int node_index) const {
  std::vector<uint16_t> enc;
  for (int i = node_index; arena_[i].parent >= 0; i = arena_[i].parent)
    enc.push_back(arena_[i].action);
  std::reverse(enc.begin(), enc.end());
  Skeleton sk;
  SymbolicState s = s0_;
  for (uint16_t e : enc) {
    const auto op = static_cast<ActionOp>(e & 3u);
    const Action a = make_action(ctx_, op, ctx_.parts[e >> 2]);
    s = successor(s, a, ctx_);  // validates soundness of the search
    sk.actions.push_back(a);
    sk.states.push_back(s);
  }
  sk.K = static_cast<int>(sk.actions.size());
  return sk;
}

std::optional<Skeleton> SkeletonEnumerator::next() {
  for (;;) {
    // Emit any goal node already generated.
    while (emit_cursor_ < arena_.size()) {
      const size_t i = emit_cursor_++;
      if (is_goal(arena_[i].state) && arena_[i].parent >= 0)
        return materialize(static_cast<int>(i));
    }
    if (cursor_ >= arena_.size()) return std::nullopt;  // space fully explored
    if (expansions_ >= budget_) {
      exhausted_ = true;
      return std::nullopt;
    }
    const size_t i = cursor_++;
    const PackedState s = arena_[i].state;
    if (is_goal(s) && arena_[i].parent >= 0) continue;  // goal nodes are leaves
    ++expansions_;

    auto push = [&](const PackedState& ns, ActionOp op, int part) {
      if (visited_.count(ns)) return;  // states recur only at equal depth
      visited_.emplace(ns, static_cast<int>(arena_.size()));
      arena_.push_back(Node{ns, static_cast<int>(i),
                            static_cast<uint16_t>((part << 2) | static_cast<int>(op))});
    };

    if (s.crane_part < 0) {
      for (int p = 0; p < n_parts_; ++p) {
        if ((s.placed >> p) & 1u) continue;
        if (p == s.placer_part) continue;
        PackedState ns = s;
        ns.crane_part = static_cast<int8_t>(p);
        push(ns, ActionOp::pick, p);
      }
    } else {
      const int p = s.crane_part;
      if (!((s.lifted >> p) & 1u)) {
        PackedState ns = s;
        ns.lifted |= 1u << p;
        push(ns, ActionOp::lift_up, p);
      } else if (s.placer_part < 0) {
        PackedState ns = s;
        ns.crane_part = -1;
        ns.placer_part = static_cast<int8_t>(p);
        push(ns, ActionOp::handover, p);
      }
    }
    if (s.placer_part >= 0) {
      const int p = s.placer_part;
      if ((ctx_.part_neighbors[p] & s.placed) != 0 ||
          ((ctx_.ground_supported >> p) & 1u)) {
        PackedState ns = s;
        ns.placer_part = -1;
        ns.placed |= 1u << p;
        ns.lifted &= ~(1u << p);
        push(ns, ActionOp::place, p);
      }
    }
  }
}

}  // namespace asmplan
