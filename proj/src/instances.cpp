#include "asmplan/instances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "asmplan/rng.hpp"
#include "asmplan/stability.hpp"

namespace asmplan {

namespace {
constexpr double kRestGap = 5e-4;     // designed clearance at touching targets
constexpr double kStorageLift = 0.02; // stored parts rest this far above ground
constexpr double kWoodDensity = 600.0;
}  // namespace

const Part& AssemblyInstance::part(const std::string& id) const {
  for (const auto& p : parts)
    if (p.id == id) return p;
  throw std::invalid_argument("unknown part: " + id);
}

KinematicTree AssemblyInstance::make_tree() const {
  return KinematicTree(robots, parts, ground_height);
}

Configuration AssemblyInstance::start_configuration() const {
  Configuration cfg;
  cfg.q = home_q;
  for (const auto& p : parts) {
    Attachment att;
    att.kind = p.placed_at_start ? ParentKind::world_placed : ParentKind::world_storage;
    att.relative = p.placed_at_start ? p.target_pose : p.storage_pose;
    cfg.attachments[p.id] = att;
  }
  return cfg;
}

RobotModel default_crane(const WorkspaceBounds& ws) {
  RobotModel r;
  r.name = "crane";
  r.base_pose = Pose::Translation(0, 0, 2.2);
  const double m = 0.2;  // keep the hook off the workspace walls
  r.joints = {
      {"x", JointKind::prismatic, Vec3::UnitX(), ws.lo.x() + m, ws.hi.x() - m, Pose{}},
      {"y", JointKind::prismatic, Vec3::UnitY(), ws.lo.y() + m, ws.hi.y() - m, Pose{}},
      {"z", JointKind::prismatic, Vec3::UnitZ(), -2.0, 0.0, Pose{}},
      {"yaw", JointKind::revolute, Vec3::UnitZ(), -3.1416, 3.1416, Pose{}},
      {"tilt_x", JointKind::revolute, Vec3::UnitX(), -0.2, 0.2, Pose{}},
      {"tilt_y", JointKind::revolute, Vec3::UnitY(), -0.2, 0.2, Pose{}},
  };
  r.gripper_offset = Pose::Translation(0, 0, -0.12);
  r.gripper_box = BoxShape{Vec3(0.05, 0.05, 0.04)};
  LinkBox hook;
  hook.name = "hook";
  hook.joint_index = 5;
  hook.box = BoxShape{Vec3(0.03, 0.03, 0.05)};
  hook.local = Pose::Translation(0, 0, -0.05);
  r.link_boxes = {hook};
  return r;
}

RobotModel default_mobile_robot(const WorkspaceBounds& ws) {
  RobotModel r;
  r.name = "mobile";
  r.base_pose = Pose{};
  const double m = 0.3;
  r.joints = {
      {"x", JointKind::prismatic, Vec3::UnitX(), ws.lo.x() + m, ws.hi.x() - m, Pose{}},
      {"y", JointKind::prismatic, Vec3::UnitY(), ws.lo.y() + m, ws.hi.y() - m, Pose{}},
      {"yaw", JointKind::revolute, Vec3::UnitZ(), -3.1416, 3.1416, Pose{}},
      // Arm pitch joints rotate about -y: positive deflection lifts the link,
      // and the 0 lower limit keeps the arm from bending below its mount.
      {"shoulder", JointKind::revolute, -Vec3::UnitY(), 0.0, 1.45,
       Pose::Translation(0.0, 0.0, 0.35)},
      {"elbow", JointKind::revolute, -Vec3::UnitY(), 0.0, 2.4,
       Pose::Translation(0.45, 0.0, 0.0)},
      {"wrist", JointKind::revolute, -Vec3::UnitY(), 0.0, 2.4,
       Pose::Translation(0.40, 0.0, 0.0)},
  };
  r.gripper_offset = Pose::Translation(0.26, 0.0, -0.08);
  r.gripper_box = BoxShape{Vec3(0.04, 0.04, 0.04)};
  LinkBox chassis{"chassis", 2, BoxShape{Vec3(0.16, 0.16, 0.14)},
                  Pose::Translation(0, 0, 0.17)};
  LinkBox upper{"upper_arm", 3, BoxShape{Vec3(0.20, 0.025, 0.025)},
                Pose::Translation(0.225, 0, 0)};
  LinkBox fore{"forearm", 4, BoxShape{Vec3(0.18, 0.022, 0.022)},
               Pose::Translation(0.20, 0, 0)};
  LinkBox wrist{"wrist_link", 5, BoxShape{Vec3(0.10, 0.02, 0.02)},
                Pose::Translation(0.12, 0, 0)};
  r.link_boxes = {chassis, upper, fore, wrist};
  return r;
}

namespace {

Eigen::VectorXd make_home(double crane_x, double crane_y, double base_x,
                          double base_y, double base_yaw) {
  Eigen::VectorXd q(12);
  q << crane_x, crane_y, -0.5, 0.0, 0.0, 0.0,  // crane: hover mid-height
      base_x, base_y, base_yaw, 0.5, 0.5, 0.3; // arm raised clear of the chassis
  return q;
}

// Places `count` parts in a depot strip of vertical-resting storage poses,
// two columns along +x, rows along y.
void assign_depot_storage(std::vector<Part>& parts, double x0, double x1,
                          double y_start, double y_step) {
  const int rows = (static_cast<int>(parts.size()) + 1) / 2;
  for (size_t i = 0; i < parts.size(); ++i) {
    const int col = static_cast<int>(i) / rows;
    const int row = static_cast<int>(i) % rows;
    const double x = col == 0 ? x0 : x1;
    const double z = parts[i].shape.half.z() + kStorageLift;
    parts[i].storage_pose = Pose::Translation(x, y_start + row * y_step, z);
  }
}

// One closed ring of n boxes at height z_center (center of the boxes), ids
// prefix+index. Tangential half-lengths are scaled by bisection until the
// tightest inter-part gap equals the designed rest gap.
std::vector<Part> ring_level(int n, double radius, double z_center,
                             double half_height, const std::string& prefix,
                             double angle_offset, Rng& rng) {
  std::vector<double> frac(n), half_b(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    frac[i] = rng.uniform(0.92, 1.08);
    sum += frac[i];
    half_b[i] = rng.uniform(0.080, 0.100);
  }
  for (auto& f : frac) f *= 2.0 * M_PI / sum;
  std::vector<double> theta(n);
  double acc = angle_offset;
  for (int i = 0; i < n; ++i) {
    theta[i] = acc + frac[i] / 2.0;
    acc += frac[i];
  }
  auto build = [&](double scale) {
    std::vector<Part> parts(n);
    for (int i = 0; i < n; ++i) {
      Part& p = parts[i];
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%s%02d", prefix.c_str(), i);
      p.id = buf;
      p.shape.half = Vec3(scale * radius * std::sin(frac[i] / 2.0), half_b[i],
                          half_height);
      p.target_pose = Pose::TranslationZRot(radius * std::cos(theta[i]),
                                            radius * std::sin(theta[i]), z_center,
                                            theta[i] + M_PI / 2.0);
      p.mass = 8.0 * p.shape.half.prod() * kWoodDensity;
    }
    return parts;
  };
  auto min_gap = [&](const std::vector<Part>& parts) {
    double g = 1e9;
    for (int i = 0; i < n; ++i) {
      const auto& a = parts[i];
      const auto& b = parts[(i + 1) % n];
      g = std::min(g, signed_distance(a.shape, a.target_pose, b.shape, b.target_pose));
    }
    return g;
  };
  double lo = 0.70, hi = 0.999;
  for (int it = 0; it < 48; ++it) {
    const double mid = 0.5 * (lo + hi);
    (min_gap(build(mid)) > kRestGap ? lo : hi) = mid;
  }
  auto parts = build(lo);
  if (min_gap(parts) <= 0.0)
    throw std::runtime_error("ring generation produced overlapping targets");
  return parts;
}

}  // namespace

AssemblyInstance generate_ring(int n_parts, double radius, std::uint64_t seed) {
  if (n_parts < 3) throw std::invalid_argument("a ring needs at least 3 parts");
  if (radius <= 0.3) throw std::invalid_argument("radius too small");
  AssemblyInstance inst;
  inst.name = "ring" + std::to_string(n_parts);
  Rng rng(seed);
  inst.parts = ring_level(n_parts, radius, 0.10 + kRestGap, 0.10, "p", 0.0, rng);
  assign_depot_storage(inst.parts, radius + 0.8, radius + 1.45, -2.3,
                       std::max(0.40, 4.6 / ((n_parts + 1) / 2)));
  inst.robots = {default_crane(inst.workspace), default_mobile_robot(inst.workspace)};
  inst.home_q = make_home(radius + 0.8, -2.3, 0.0, 0.0, 0.0);
  return inst;
}

AssemblyInstance generate_pavilion(std::uint64_t seed) {
  AssemblyInstance inst;
  inst.name = "pavilion24";
  Rng rng(seed);
  const double radius = 1.15;
  auto lower = ring_level(12, radius, 0.10 + kRestGap, 0.10, "a", 0.0, rng);
  auto upper = ring_level(12, radius, 0.30 + 3.0 * kRestGap, 0.09, "b",
                          M_PI / 12.0, rng);
  inst.parts = lower;
  inst.parts.insert(inst.parts.end(), upper.begin(), upper.end());
  assign_depot_storage(inst.parts, radius + 0.8, radius + 1.45, -2.3, 0.42);
  inst.robots = {default_crane(inst.workspace), default_mobile_robot(inst.workspace)};
  inst.home_q = make_home(radius + 0.8, -2.3, 0.0, 0.0, 0.0);
  return inst;
}

AssemblyInstance generate_wall(int rows, int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("wall needs rows, cols >= 1");
  AssemblyInstance inst;
  inst.name = "wall" + std::to_string(rows) + "x" + std::to_string(cols);
  Rng rng(seed);
  const double ax = 0.15, cz = 0.05;
  const double pitch = 2.0 * ax + kRestGap;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Part p;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "r%dc%d", r, c);
      p.id = buf;
      // Depth jitter keeps extents unique; equal masses keep the ground row's
      // equilibrium load split exactly even.
      p.shape.half = Vec3(ax, rng.uniform(0.055, 0.068), cz);
      p.mass = 1.0;
      const double x0 = (r % 2 == 0) ? -(cols - 1) * pitch / 2.0
                                     : -(cols - 1) * pitch / 2.0 + pitch / 2.0;
      const double z = kRestGap + cz + r * (2.0 * cz + kRestGap);
      p.target_pose = Pose::Translation(x0 + c * pitch, 0.0, z);
      inst.parts.push_back(p);
    }
  }
  assign_depot_storage(inst.parts, 1.6, 2.3, -2.3,
                       std::max(0.36, 4.6 / ((rows * cols + 1) / 2)));
  inst.robots = {default_crane(inst.workspace), default_mobile_robot(inst.workspace)};
  inst.home_q = make_home(1.6, -2.3, 0.0, -1.0, 0.0);
  return inst;
}

AssemblyInstance generate_corridor(std::uint64_t seed) {
  AssemblyInstance inst;
  inst.name = "corridor";
  Rng rng(seed);
  auto wall = [&](const std::string& id, double cx) {
    Part w;
    w.id = id;
    w.shape.half = Vec3(1.0, 0.06, 0.40);
    w.mass = 8.0 * w.shape.half.prod() * kWoodDensity;
    w.target_pose = Pose::Translation(cx, 0.0, 0.40 + kRestGap);
    w.storage_pose = w.target_pose;
    w.placed_at_start = true;
    return w;
  };
  // Two 2 m slabs with a 0.4 m corridor between their ends.
  inst.parts.push_back(wall("wall0", -1.4));
  inst.parts.push_back(wall("wall1", 1.0));
  for (int i = 0; i < 2; ++i) {
    Part p;
    p.id = "box" + std::to_string(i);
    p.shape.half = Vec3(0.10 + 0.01 * i, 0.10, 0.08 + rng.uniform(0.0, 0.01));
    p.mass = 8.0 * p.shape.half.prod() * kWoodDensity;
    p.target_pose = Pose::Translation(1.2 - 0.6 * i, 1.3 + 0.2 * i,
                                      p.shape.half.z() + kRestGap);
    inst.parts.push_back(p);
  }
  inst.parts[2].storage_pose = Pose::Translation(1.2, -1.9, inst.parts[2].shape.half.z() + kStorageLift);
  inst.parts[3].storage_pose = Pose::Translation(0.4, -2.2, inst.parts[3].shape.half.z() + kStorageLift);
  inst.robots = {default_crane(inst.workspace), default_mobile_robot(inst.workspace)};
  inst.home_q = make_home(1.2, -1.9, 1.2, -1.5, 1.5708);
  return inst;
}

std::vector<std::string> validate(const AssemblyInstance& inst) {
  std::vector<std::string> v;
  std::set<std::string> ids;
  std::set<std::array<double, 3>> extents;
  for (const auto& p : inst.parts) {
    if (p.id == "ground") v.push_back("part id 'ground' is reserved");
    if (!ids.insert(p.id).second) v.push_back("duplicate part id: " + p.id);
    if (!(p.shape.half.minCoeff() > 0.0))
      v.push_back("non-positive half extents: " + p.id);
    if (!(p.mass > 0.0)) v.push_back("non-positive mass: " + p.id);
    if (!extents.insert({p.shape.half.x(), p.shape.half.y(), p.shape.half.z()}).second)
      v.push_back("duplicate extents: " + p.id);
    if (std::abs(p.storage_pose.q.norm() - 1.0) > 1e-9 ||
        std::abs(p.target_pose.q.norm() - 1.0) > 1e-9)
      v.push_back("non-unit quaternion: " + p.id);
    for (const Pose* pose : {&p.storage_pose, &p.target_pose}) {
      const Aabb bb = box_aabb(p.shape, *pose);
      if ((bb.lo.array() < inst.workspace.lo.array() - 1e-6).any() ||
          (bb.hi.array() > inst.workspace.hi.array() + 1e-6).any())
        v.push_back("pose outside workspace: " + p.id);
    }
    if (box_ground_distance(p.shape, p.target_pose, inst.ground_height).d < -1e-6)
      v.push_back("target below ground: " + p.id);
  }
  for (size_t i = 0; i < inst.parts.size(); ++i)
    for (size_t j = i + 1; j < inst.parts.size(); ++j) {
      const auto& a = inst.parts[i];
      const auto& b = inst.parts[j];
      if (signed_distance(a.shape, a.target_pose, b.shape, b.target_pose) < -1e-6)
        v.push_back("penetrating targets: " + a.id + " / " + b.id);
      if (!a.placed_at_start && !b.placed_at_start &&
          signed_distance(a.shape, a.storage_pose, b.shape, b.storage_pose) < -1e-6)
        v.push_back("penetrating storage poses: " + a.id + " / " + b.id);
    }
  for (const auto& r : inst.robots)
    for (const auto& j : r.joints)
      if (!(j.lo < j.hi))
        v.push_back("joint limits not ordered: " + r.name + "/" + j.name);
  if (inst.robots.size() != 2) v.push_back("expected exactly two robots");
  if (!(inst.adjacency_tol > 0.0)) v.push_back("adjacency_tol must be > 0");
  if (inst.home_q.size() == 0) v.push_back("missing home configuration");

  // Connectivity of the finished structure: neighbor graph plus ground.
  if (!inst.parts.empty()) {
    const NeighborGraph g = build_neighbor_graph(inst, inst.adjacency_tol);
    std::set<std::string> seen;
    std::vector<std::string> stack(g.ground_contacts.begin(), g.ground_contacts.end());
    while (!stack.empty()) {
      const std::string cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      for (const auto& n : g.adjacency.at(cur)) stack.push_back(n);
    }
    if (seen.size() != inst.parts.size())
      v.push_back("structure is not connected through ground contacts");
  }
  return v;
}

}  // namespace asmplan
