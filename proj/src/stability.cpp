#include "asmplan/stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asmplan/instances.hpp"

namespace asmplan {

NeighborGraph build_neighbor_graph(const AssemblyInstance& instance, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("tol must be > 0");
  NeighborGraph g;
  const auto& parts = instance.parts;
  for (const auto& p : parts) g.adjacency[p.id];  // ensure every node exists
  for (size_t i = 0; i < parts.size(); ++i) {
    for (size_t j = i + 1; j < parts.size(); ++j) {
      const double d = signed_distance(parts[i].shape, parts[i].target_pose,
                                       parts[j].shape, parts[j].target_pose);
      if (d <= tol) {
        g.adjacency[parts[i].id].insert(parts[j].id);
        g.adjacency[parts[j].id].insert(parts[i].id);
      }
    }
    const double dg = box_ground_distance(parts[i].shape, parts[i].target_pose,
                                          instance.ground_height).d;
    if (dg <= tol) g.ground_contacts.insert(parts[i].id);
  }
  return g;
}

double placed_neighbor_score(const std::set<std::string>& placed,
                             const std::set<std::string>& newly_placed,
                             const NeighborGraph& graph) {
  if (newly_placed.empty()) throw std::invalid_argument("newly placed set is empty");
  double total = 0.0;
  for (const auto& w : newly_placed) {
    auto it = graph.adjacency.find(w);
    if (it == graph.adjacency.end()) continue;
    for (const auto& n : it->second) total += placed.count(n) ? 1.0 : 0.0;
  }
  return -total / static_cast<double>(newly_placed.size());
}

std::optional<EquilibriumSolution> solve_equilibrium(
    const std::set<std::string>& assembly, const NeighborGraph& graph,
    const AssemblyInstance& instance, const Vec3& gravity) {
  if (assembly.empty()) throw std::invalid_argument("assembly is empty");

  struct Interface {
    std::string a, b;  // b == "" for ground
    Vec3 centroid;
  };
  std::vector<Interface> interfaces;
  std::vector<std::string> parts(assembly.begin(), assembly.end());
  std::map<std::string, int> row_of;
  for (size_t i = 0; i < parts.size(); ++i) row_of[parts[i]] = static_cast<int>(i);

  const double tol = instance.adjacency_tol;
  for (size_t i = 0; i < parts.size(); ++i) {
    const Part& pa = instance.part(parts[i]);
    for (size_t j = i + 1; j < parts.size(); ++j) {
      if (!graph.adjacent(parts[i], parts[j])) continue;
      const Part& pb = instance.part(parts[j]);
      auto c = contact_patch_centroid(pa.shape, pa.target_pose, pb.shape,
                                      pb.target_pose, tol);
      if (!c) continue;
      interfaces.push_back({parts[i], parts[j], *c});
    }
    if (graph.ground_contacts.count(parts[i])) {
      auto c = ground_patch_centroid(pa.shape, pa.target_pose,
                                     instance.ground_height, tol);
      if (c) interfaces.push_back({parts[i], "", *c});
    }
  }

  const int rows = static_cast<int>(parts.size()) * 6;
  const int cols = static_cast<int>(interfaces.size()) * 6;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);

  double total_load = 0.0;
  for (size_t i = 0; i < parts.size(); ++i) {
    const Part& p = instance.part(parts[i]);
    b.segment<3>(6 * i) = -p.mass * gravity;
    total_load += p.mass * gravity.norm();
  }
  auto cross_mat = [](const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
  };
  for (size_t k = 0; k < interfaces.size(); ++k) {
    const auto& itf = interfaces[k];
    const int fa = row_of.at(itf.a);
    const Vec3 com_a = instance.part(itf.a).target_pose.t;
    // Wrench acts on part a (force columns 6k..6k+2, torque 6k+3..6k+5).
    A.block<3, 3>(6 * fa, 6 * k) += Mat3::Identity();
    A.block<3, 3>(6 * fa + 3, 6 * k) += cross_mat(itf.centroid - com_a);
    A.block<3, 3>(6 * fa + 3, 6 * k + 3) += Mat3::Identity();
    if (!itf.b.empty()) {
      const int fb = row_of.at(itf.b);
      const Vec3 com_b = instance.part(itf.b).target_pose.t;
      A.block<3, 3>(6 * fb, 6 * k) -= Mat3::Identity();
      A.block<3, 3>(6 * fb + 3, 6 * k) -= cross_mat(itf.centroid - com_b);
      A.block<3, 3>(6 * fb + 3, 6 * k + 3) -= Mat3::Identity();
    }
  }

  Eigen::VectorXd w;
  if (cols == 0) {
    w.resize(0);
  } else {
    w = A.completeOrthogonalDecomposition().solve(b);
  }
  const double residual = cols == 0 ? b.norm() : (A * w - b).norm();
  if (residual > 1e-8 * std::max(total_load, 1.0)) return std::nullopt;

  EquilibriumSolution sol;
  sol.residual = residual;
  for (size_t k = 0; k < interfaces.size(); ++k) {
    InterfaceWrench iw;
    iw.part_a = interfaces[k].a;
    iw.part_b = interfaces[k].b;
    iw.centroid = interfaces[k].centroid;
    iw.force = w.segment<3>(6 * k);
    iw.torque = w.segment<3>(6 * k + 3);
    sol.wrenches.push_back(iw);
  }
  return sol;
}

double static_torque_score(const std::set<std::string>& placed,
                           const std::set<std::string>& newly_placed,
                           const NeighborGraph& graph,
                           const AssemblyInstance& instance) {
  std::set<std::string> assembly = placed;
  assembly.insert(newly_placed.begin(), newly_placed.end());
  const auto sol = solve_equilibrium(assembly, graph, instance);
  if (!sol) return infeasible_score();
  double torques = 0.0;
  for (const auto& w : sol->wrenches)
    if (!w.part_b.empty()) torques += w.torque.norm();
  const double score = torques / static_cast<double>(assembly.size());
  // Quantize away solver roundoff so physically tied candidates compare equal
  // and fall through to the deterministic tie-break.
  return std::round(score / 1e-9) * 1e-9;
}

double skeleton_stability_score(const Skeleton& skeleton,
                                const std::set<std::string>& placed_before,
                                StabilityObjective objective,
                                const NeighborGraph& graph,
                                const AssemblyInstance& instance) {
  if (objective == StabilityObjective::none) return 0.0;
  double sum = 0.0;
  std::set<std::string> placed = placed_before;
  for (const auto& a : skeleton.actions) {
    if (a.op != ActionOp::place) continue;
    const std::set<std::string> w{a.args[0]};
    if (objective == StabilityObjective::neighbors) {
      sum += placed_neighbor_score(placed, w, graph);
    } else {
      const double s = static_torque_score(placed, w, graph, instance);
      if (std::isinf(s)) return infeasible_score();
      sum += s;
    }
    placed.insert(a.args[0]);
  }
  return sum;
}

namespace {
// Ordering: score, then shorter K, then lexicographic action sequence.
bool better(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.skeleton.K != b.skeleton.K) return a.skeleton.K < b.skeleton.K;
  const size_t n = std::min(a.skeleton.actions.size(), b.skeleton.actions.size());
  for (size_t i = 0; i < n; ++i) {
    const std::string sa = a.skeleton.actions[i].str();
    const std::string sb = b.skeleton.actions[i].str();
    if (sa != sb) return sa < sb;
  }
  return false;
}
}  // namespace

Selection select_candidate(const std::vector<ScoredCandidate>& candidates,
                           const StabilitySearchConfig& cfg, bool can_expand) {
  if (candidates.empty()) throw std::invalid_argument("no candidates");
  int best = 0, second = -1;
  for (int i = 1; i < static_cast<int>(candidates.size()); ++i) {
    if (better(candidates[i], candidates[best])) {
      second = best;
      best = i;
    } else if (second < 0 || better(candidates[i], candidates[second])) {
      second = i;
    }
  }
  Selection sel;
  sel.best_index = best;
  if (!can_expand) {
    sel.proceed = true;
    sel.suboptimal = true;
    return sel;
  }
  const int n = static_cast<int>(candidates.size());
  if (n < cfg.min_candidates) return sel;  // expand more
  if (second < 0) {
    sel.proceed = true;
    return sel;
  }
  const double gap = candidates[best].score - candidates[second].score;
  if (gap < cfg.epsilon(n)) sel.proceed = true;
  return sel;
}

}  // namespace asmplan
