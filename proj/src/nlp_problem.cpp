#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asmplan/nlp.hpp"

namespace asmplan {

const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::pose: return "pose";
    case BoundKind::sequence: return "seq";
    case BoundKind::full_path: return "full";
  }
  return "?";
}

int CompiledProblem::switch_knot(int k) const {
  if (kind == BoundKind::pose) return 0;
  return kind == BoundKind::sequence ? k : k * phases.n_t;
}

namespace {

constexpr double kGateSlack = 0.1;  // AABB gate hysteresis on collision rows

struct EventCache {
  Eigen::Matrix3Xd L, W;  // columns: (J_old - J_new)(x) = L_c + W_c x x
  Mat3 Rn_T = Mat3::Identity();
  Mat3 Re = Mat3::Identity();  // R_new^T * R_old
};

struct Segment {
  int first = 0, last = 0;
  int frame = -1;  // parent frame, -1 = world
  Pose M;          // part pose = frame_pose * M
  std::vector<std::pair<int, Mat3>> chain;  // (event index, prefix rotation)
};

struct Workspace {
  std::vector<Eigen::VectorXd> knots;
  std::vector<std::vector<Pose>> fk;      // [knot][frame]
  std::vector<std::vector<Pose>> ppose;   // [part][knot]
  std::vector<EventCache> events;
  std::vector<std::vector<Segment>> segments;    // [part]
  std::vector<std::vector<int>> seg_of_knot;     // [part][knot]
  std::vector<std::vector<Aabb>> aabb;           // [body][knot]
  std::vector<std::vector<Pose>> body_pose;      // [body][knot]
};

class Evaluator {
 public:
  Evaluator(const CompiledProblem& p, const std::vector<Eigen::VectorXd>& knots,
            Evaluation* out, bool exact_all)
      : p_(p), tree_(*p.tree), out_(out), exact_all_(exact_all) {
    w_.knots = knots;
    forward();
    if (out_) {
      out_->value.setZero(p_.n_rows);
      out_->triplets.clear();
      out_->finite = true;
    }
  }

  void forward() {
    const int n = p_.n_knots;
    w_.fk.resize(n);
    for (int t = 0; t < n; ++t) w_.fk[t] = tree_.frame_fk(w_.knots[t]);

    const int n_parts = static_cast<int>(tree_.parts().size());
    w_.ppose.assign(n_parts, {});
    w_.segments.assign(n_parts, {});
    w_.seg_of_knot.assign(n_parts, {});
    w_.events.resize(p_.events.size());

    std::vector<std::vector<int>> events_of_part(n_parts);
    for (size_t e = 0; e < p_.events.size(); ++e)
      events_of_part[p_.events[e].part].push_back(static_cast<int>(e));

    for (int pi = 0; pi < n_parts; ++pi) {
      auto& pose_row = w_.ppose[pi];
      pose_row.assign(n, p_.static_part_pose[pi]);
      auto& segs = w_.segments[pi];
      Segment s0;
      s0.first = 0;
      s0.last = n - 1;
      s0.frame = -1;
      s0.M = p_.static_part_pose[pi];
      segs.push_back(s0);
      for (int ei : events_of_part[pi]) {
        const auto& ev = p_.events[ei];
        Segment& prev = segs.back();
        prev.last = ev.knot;
        // Part pose at the switch knot under the pre-switch attachment.
        for (int t = prev.first; t <= prev.last; ++t)
          pose_row[t] = prev.frame < 0 ? prev.M : w_.fk[t][prev.frame] * prev.M;
        const Pose at_switch = pose_row[ev.knot];

        EventCache& cache = w_.events[ei];
        const Pose old_pose = ev.old_frame < 0 ? Pose{} : w_.fk[ev.knot][ev.old_frame];
        const Pose new_pose = ev.new_frame < 0 ? Pose{} : w_.fk[ev.knot][ev.new_frame];
        cache.Rn_T = new_pose.rot().transpose();
        cache.Re = cache.Rn_T * old_pose.rot();
        cache.L.setZero(3, p_.dof);
        cache.W.setZero(3, p_.dof);
        auto accumulate = [&](int frame, double sign) {
          if (frame < 0) return;
          const Pose& fp = w_.fk[ev.knot][frame];
          const Eigen::Matrix3Xd v = tree_.point_jacobian(frame, fp.t, w_.fk[ev.knot]);
          const Eigen::Matrix3Xd om = tree_.angular_jacobian(frame, w_.fk[ev.knot]);
          for (int c = 0; c < p_.dof; ++c) {
            cache.L.col(c) += sign * (v.col(c) - om.col(c).cross(fp.t));
            cache.W.col(c) += sign * om.col(c);
          }
        };
        accumulate(ev.old_frame, +1.0);
        accumulate(ev.new_frame, -1.0);

        Segment next;
        next.first = ev.knot + 1;
        next.last = n - 1;
        next.frame = ev.new_frame;
        next.M = ev.new_frame < 0 ? at_switch : new_pose.inverse() * at_switch;
        next.chain = prev.chain;
        for (auto& [idx, B] : next.chain) B = cache.Re * B;
        next.chain.emplace_back(ei, cache.Rn_T);
        segs.push_back(next);
      }
      Segment& final_seg = segs.back();
      for (int t = final_seg.first; t <= final_seg.last; ++t)
        pose_row[t] =
            final_seg.frame < 0 ? final_seg.M : w_.fk[t][final_seg.frame] * final_seg.M;
      auto& idx = w_.seg_of_knot[pi];
      idx.assign(n, 0);
      for (size_t s = 0; s < segs.size(); ++s)
        for (int t = segs[s].first; t <= segs[s].last && t < n; ++t) idx[t] = static_cast<int>(s);
    }

    // Body poses and AABBs per knot.
    const auto& bodies = tree_.bodies();
    w_.body_pose.assign(bodies.size(), {});
    w_.aabb.assign(bodies.size(), {});
    for (size_t b = 0; b < bodies.size(); ++b) {
      if (bodies[b].kind == CollisionBody::Kind::ground) continue;
      w_.body_pose[b].resize(n);
      w_.aabb[b].resize(n);
      for (int t = 0; t < n; ++t) {
        Pose pose;
        if (bodies[b].kind == CollisionBody::Kind::robot_link) {
          pose = w_.fk[t][bodies[b].frame] * bodies[b].local;
        } else {
          pose = w_.ppose[part_index(bodies[b].part_id)][t];
        }
        w_.body_pose[b][t] = pose;
        w_.aabb[b][t] = box_aabb(bodies[b].box, pose);
      }
    }
  }

  int part_index(const std::string& id) const {
    const auto& parts = tree_.parts();
    for (size_t i = 0; i < parts.size(); ++i)
      if (parts[i].id == id) return static_cast<int>(i);
    throw std::logic_error("unknown part in problem: " + id);
  }

  const Pose& body_pose(int body, int t) const { return w_.body_pose[body][t]; }
  const std::vector<std::vector<Pose>>& part_poses() const { return w_.ppose; }

  void set(int row, double v) {
    out_->value[row] = v;
    if (!std::isfinite(v)) out_->finite = false;
  }

  void add_jac(int row, int knot, int col_local, double v) {
    const int off = p_.var_offset(knot);
    if (off < 0) return;  // frozen knot
    if (!std::isfinite(v)) {
      out_->finite = false;
      return;
    }
    if (v != 0.0) out_->triplets.emplace_back(row, off + col_local, v);
  }

  // a^T * (point Jacobian of the material point of `body` at world point pt).
  void add_point_pullback(int row, int t, int body, const Vec3& pt, const Vec3& a,
                          double scale) {
    const auto& cb = tree_.bodies()[body];
    if (cb.kind == CollisionBody::Kind::ground) return;
    if (cb.kind == CollisionBody::Kind::robot_link) {
      const Eigen::Matrix3Xd J = tree_.point_jacobian(cb.frame, pt, w_.fk[t]);
      const Eigen::RowVectorXd r = scale * (a.transpose() * J);
      for (int c = 0; c < p_.dof; ++c) add_jac(row, t, c, r[c]);
      return;
    }
    part_point_pullback(row, t, part_index(cb.part_id), pt, a, scale);
  }

  void part_point_pullback(int row, int t, int pi, const Vec3& pt, const Vec3& a,
                           double scale) {
    const Segment& seg = w_.segments[pi][w_.seg_of_knot[pi][t]];
    if (seg.frame >= 0) {
      const Eigen::Matrix3Xd J = tree_.point_jacobian(seg.frame, pt, w_.fk[t]);
      const Eigen::RowVectorXd r = scale * (a.transpose() * J);
      for (int c = 0; c < p_.dof; ++c) add_jac(row, t, c, r[c]);
    }
    if (seg.chain.empty()) return;
    const Mat3 Rp = seg.frame >= 0 ? w_.fk[t][seg.frame].rot() : Mat3::Identity();
    const Vec3 material = w_.ppose[pi][t].inverse().apply(pt);
    for (const auto& [ei, B] : seg.chain) {
      const EventCache& cache = w_.events[ei];
      const int s = p_.events[ei].knot;
      const Vec3 u = (Rp * B).transpose() * a;
      const Vec3 x = w_.ppose[pi][s].apply(material);
      const Eigen::VectorXd cols =
          scale * (cache.L.transpose() * u + cache.W.transpose() * x.cross(u));
      for (int c = 0; c < p_.dof; ++c) add_jac(row, s, c, cols[c]);
    }
  }

  void add_angular_pullback(int row, int t, int body, const Vec3& b, double scale) {
    const auto& cb = tree_.bodies()[body];
    if (cb.kind == CollisionBody::Kind::ground) return;
    if (cb.kind == CollisionBody::Kind::robot_link) {
      const Eigen::Matrix3Xd J = tree_.angular_jacobian(cb.frame, w_.fk[t]);
      const Eigen::RowVectorXd r = scale * (b.transpose() * J);
      for (int c = 0; c < p_.dof; ++c) add_jac(row, t, c, r[c]);
      return;
    }
    part_angular_pullback(row, t, part_index(cb.part_id), b, scale);
  }

  void part_angular_pullback(int row, int t, int pi, const Vec3& b, double scale) {
    const Segment& seg = w_.segments[pi][w_.seg_of_knot[pi][t]];
    if (seg.frame >= 0) {
      const Eigen::Matrix3Xd J = tree_.angular_jacobian(seg.frame, w_.fk[t]);
      const Eigen::RowVectorXd r = scale * (b.transpose() * J);
      for (int c = 0; c < p_.dof; ++c) add_jac(row, t, c, r[c]);
    }
    if (seg.chain.empty()) return;
    const Mat3 Rp = seg.frame >= 0 ? w_.fk[t][seg.frame].rot() : Mat3::Identity();
    for (const auto& [ei, B] : seg.chain) {
      const EventCache& cache = w_.events[ei];
      const int s = p_.events[ei].knot;
      const Vec3 u = (Rp * B).transpose() * b;
      const Eigen::VectorXd cols = scale * (cache.W.transpose() * u);
      for (int c = 0; c < p_.dof; ++c) add_jac(row, s, c, cols[c]);
    }
  }

  // d(signed distance)/dq pullbacks scaled by `scale` into `row`.
  void add_distance_gradient(int row, int t, int body_a, int body_b,
                             const DistanceResult& dr, double scale) {
    const auto& bodies = tree_.bodies();
    const bool ga = bodies[body_a].kind == CollisionBody::Kind::ground;
    const bool gb = bodies[body_b].kind == CollisionBody::Kind::ground;
    if (ga || gb) {
      const int box = ga ? body_b : body_a;
      // Ground distance = lowest-vertex z minus ground height.
      add_point_pullback(row, t, box, dr.point_a, Vec3::UnitZ(), scale);
      return;
    }
    if (!dr.penetrating && dr.d > 1e-12) {
      add_point_pullback(row, t, body_b, dr.point_b, dr.normal, scale);
      add_point_pullback(row, t, body_a, dr.point_a, dr.normal, -scale);
      return;
    }
    // Face-axis form: d = s u.(cb-ca) - h_own,i - sum_j h_other,j |u. m_j|.
    const int owner = dr.axis_owner == 1 ? body_b : body_a;
    const int other = dr.axis_owner == 1 ? body_a : body_b;
    const Pose& pa = body_pose(body_a, t);
    const Pose& pb = body_pose(body_b, t);
    const Pose& p_other = dr.axis_owner == 1 ? pa : pb;
    const BoxShape& other_box = bodies[other].box;
    const Vec3 c = pb.t - pa.t;
    const Vec3 u = dr.normal;  // owner's face axis, oriented a -> b
    // d = u.(cb - ca) - h_owner,i - sum_j h_other,j |u.m_j| with u material
    // on the owner; the owner's own projection radius is constant.
    const Mat3 Ro = p_other.rot();
    Vec3 p_T = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
      const Vec3 m = Ro.col(j);
      const double sj = u.dot(m) >= 0.0 ? 1.0 : -1.0;
      p_T += other_box.half[j] * sj * m;
    }
    // d' = u.(vb - va) + omega_owner.(u x (cb-ca) - u x p_T) + omega_other.(u x p_T)
    add_point_pullback(row, t, body_b, pb.t, u, scale);
    add_point_pullback(row, t, body_a, pa.t, u, -scale);
    add_angular_pullback(row, t, owner, u.cross(c - p_T), scale);
    add_angular_pullback(row, t, other, u.cross(p_T), scale);
  }

  void run() {
    const auto& bodies = tree_.bodies();
    for (const auto& f : p_.touches) {
      const auto& pb = bodies[f.body_a];
      const DistanceResult dr =
          box_distance(pb.box, body_pose(f.body_a, f.knot),
                       tree_.parts()[f.part].shape, w_.ppose[f.part][f.knot]);
      set(f.row, dr.d);
      const int part_body = part_body_index(f.part);
      add_distance_gradient(f.row, f.knot, f.body_a, part_body, dr, 1.0);
    }
    for (const auto& f : p_.fit_poses) {
      const Pose& X = w_.ppose[f.part][f.knot];
      const Vec3 dt6 = X.t - f.target.t;
      for (int i = 0; i < 3; ++i) {
        set(f.row + i, dt6[i]);
        part_point_pullback(f.row + i, f.knot, f.part, X.t, Vec3::Unit(i), 1.0);
      }
      Quat qe = f.target.q.conjugate() * X.q;
      double flip = 1.0;
      if (qe.w() < 0.0) {
        qe.coeffs() *= -1.0;
        flip = -1.0;
      }
      for (int i = 0; i < 3; ++i) set(f.row + 3 + i, qe.vec()[i]);
      // Rotation-error Jacobian w.r.t. the part's world angular velocity.
      Mat3 B;
      for (int c = 0; c < 3; ++c) {
        Quat wq(0.0, 0.0, 0.0, 0.0);
        wq.vec() = 0.5 * Vec3::Unit(c);
        const Quat dq = f.target.q.conjugate() * (wq * X.q);
        B.col(c) = flip * dq.vec();
      }
      for (int i = 0; i < 3; ++i)
        part_angular_pullback(f.row + 3 + i, f.knot, f.part, B.row(i).transpose(), 1.0);
    }
    for (const auto& f : p_.post_lifts) {
      const Pose& X = w_.ppose[f.part][f.knot];
      set(f.row, f.min_z - X.t.z());
      part_point_pullback(f.row, f.knot, f.part, X.t, -Vec3::UnitZ(), 1.0);
    }
    for (const auto& f : p_.pre_handovers) {
      const Vec3 g = body_pose(f.gripper_body, f.knot).t;
      set(f.row + 0, f.target.z() + f.dz - g.z());
      add_point_pullback(f.row + 0, f.knot, f.gripper_body, g, -Vec3::UnitZ(), 1.0);
      set(f.row + 1, g.x() - f.target.x() - f.dxy);
      add_point_pullback(f.row + 1, f.knot, f.gripper_body, g, Vec3::UnitX(), 1.0);
      set(f.row + 2, f.target.x() - g.x() - f.dxy);
      add_point_pullback(f.row + 2, f.knot, f.gripper_body, g, -Vec3::UnitX(), 1.0);
      set(f.row + 3, g.y() - f.target.y() - f.dxy);
      add_point_pullback(f.row + 3, f.knot, f.gripper_body, g, Vec3::UnitY(), 1.0);
      set(f.row + 4, f.target.y() - g.y() - f.dxy);
      add_point_pullback(f.row + 4, f.knot, f.gripper_body, g, -Vec3::UnitY(), 1.0);
    }
    for (const auto& f : p_.pairs) {
      int row = f.row0;
      const bool ga = bodies[f.body_a].kind == CollisionBody::Kind::ground;
      const bool gb = bodies[f.body_b].kind == CollisionBody::Kind::ground;
      for (int t = 0; t < p_.n_knots; ++t) {
        const double margin = f.margin[t];
        if (std::isnan(margin)) continue;
        const int r = row++;
        if (ga || gb) {
          const int box = ga ? f.body_b : f.body_a;
          const auto dr = box_ground_distance(bodies[box].box, body_pose(box, t),
                                              tree_.ground_z());
          set(r, margin - dr.d);
          add_distance_gradient(r, t, f.body_a, f.body_b, dr, -1.0);
          continue;
        }
        if (!exact_all_) {
          const double gap = w_.aabb[f.body_a][t].gap(w_.aabb[f.body_b][t]);
          if (gap > margin + kGateSlack) {
            set(r, margin - gap);  // lower bound on the true (satisfied) value
            continue;
          }
        }
        const DistanceResult dr =
            box_distance(bodies[f.body_a].box, body_pose(f.body_a, t),
                         bodies[f.body_b].box, body_pose(f.body_b, t));
        set(r, margin - dr.d);
        add_distance_gradient(r, t, f.body_a, f.body_b, dr, -1.0);
      }
    }
    if (p_.accel_row0 >= 0) {
      const double scale = std::pow(p_.dt, -1.5) * std::sqrt(p_.params.accel_weight);
      int row = p_.accel_row0;
      for (int t : p_.accel_knots) {
        for (int j = 0; j < p_.dof; ++j) {
          const double w = p_.joint_weight[j] * scale;
          const double v =
              w * (w_.knots[t + 1][j] - 2.0 * w_.knots[t][j] + w_.knots[t - 1][j]);
          set(row, v);
          add_jac(row, t + 1, j, w);
          add_jac(row, t, j, -2.0 * w);
          add_jac(row, t - 1, j, w);
          ++row;
        }
      }
    }
    if (p_.limits_row0 >= 0) {
      const Eigen::VectorXd lo = tree_.joint_lower();
      const Eigen::VectorXd hi = tree_.joint_upper();
      int row = p_.limits_row0;
      for (int t = p_.knot0_frozen ? 1 : 0; t < p_.n_knots; ++t) {
        for (int j = 0; j < p_.dof; ++j) {
          set(row, w_.knots[t][j] - hi[j]);
          add_jac(row, t, j, 1.0);
          ++row;
          set(row, lo[j] - w_.knots[t][j]);
          add_jac(row, t, j, -1.0);
          ++row;
        }
      }
    }
  }

  int part_body_index(int part) const {
    const auto& bodies = tree_.bodies();
    const std::string& id = tree_.parts()[part].id;
    for (size_t b = 0; b < bodies.size(); ++b)
      if (bodies[b].kind == CollisionBody::Kind::part && bodies[b].part_id == id)
        return static_cast<int>(b);
    throw std::logic_error("part body missing");
  }

  Workspace w_;

 private:
  const CompiledProblem& p_;
  const KinematicTree& tree_;
  Evaluation* out_;
  bool exact_all_;
};

}  // namespace

void CompiledProblem::evaluate(const std::vector<Eigen::VectorXd>& knots,
                               Evaluation* out, bool exact_all) const {
  if (static_cast<int>(knots.size()) != n_knots)
    throw std::invalid_argument("knot count mismatch");
  Evaluator ev(*this, knots, out, exact_all);
  ev.run();
}

std::vector<std::vector<Pose>> CompiledProblem::part_poses(
    const std::vector<Eigen::VectorXd>& knots) const {
  Evaluator ev(*this, knots, nullptr, false);
  return ev.w_.ppose;
}

namespace {

int find_body(const KinematicTree& tree, const std::string& name) {
  const auto& bodies = tree.bodies();
  for (size_t b = 0; b < bodies.size(); ++b)
    if (bodies[b].name == name) return static_cast<int>(b);
  throw std::invalid_argument("unknown body: " + name);
}

int part_idx(const KinematicTree& tree, const std::string& id) {
  const auto& parts = tree.parts();
  for (size_t i = 0; i < parts.size(); ++i)
    if (parts[i].id == id) return static_cast<int>(i);
  throw std::invalid_argument("unknown part: " + id);
}

}  // namespace

CompiledProblem compile_trajectory(const KinematicTree& tree,
                                   const AssemblyInstance& instance,
                                   const NeighborGraph& graph,
                                   const Skeleton& skeleton,
                                   const Configuration& start, BoundKind kind,
                                   const PhaseSpec& phases,
                                   const NlpParams& params) {
  CompiledProblem p;
  p.tree = &tree;
  p.kind = kind;
  p.phases = phases;
  p.params = params;
  p.K = skeleton.K;
  p.dof = tree.dof();
  p.q0 = start.q;
  p.joint_weight.resize(p.dof);
  for (const auto& f : tree.frames())
    if (f.q_index >= 0)
      p.joint_weight[f.q_index] =
          *f.joint_kind == JointKind::revolute ? params.revolute_weight : 1.0;

  switch (kind) {
    case BoundKind::pose:
      p.n_knots = 1;
      p.knot0_frozen = false;
      p.dt = 0.0;
      break;
    case BoundKind::sequence:
      p.n_knots = p.K + 1;
      p.knot0_frozen = true;
      p.dt = phases.T;
      break;
    case BoundKind::full_path:
      p.n_knots = p.K * phases.n_t + 1;
      p.knot0_frozen = true;
      p.dt = phases.T / phases.n_t;
      break;
  }

  // Initial world pose of every part; all parts must start world-attached.
  const auto& parts = tree.parts();
  p.static_part_pose.resize(parts.size());
  for (size_t i = 0; i < parts.size(); ++i) {
    const auto it = start.attachments.find(parts[i].id);
    if (it == start.attachments.end())
      throw std::invalid_argument("part missing from start configuration: " + parts[i].id);
    if (it->second.kind == ParentKind::gripper)
      throw std::invalid_argument("parts must start world-attached");
    p.static_part_pose[i] = it->second.relative;
  }

  const std::string crane = instance.robots[0].name;
  const std::string placer = instance.robots[1].name;
  const int crane_grip_body = find_body(tree, crane + "/gripper");
  const int placer_grip_body = find_body(tree, placer + "/gripper");
  const int crane_grip_frame = tree.gripper_frame(crane);
  const int placer_grip_frame = tree.gripper_frame(placer);

  struct PartSchedule {
    int pick = -1, lift = -1, handover = -1, place = -1;  // switch knots
  };
  std::map<std::string, PartSchedule> sched;

  int row = 0;
  auto add_rows = [&](RowClass cls, int n) {
    const int r0 = row;
    for (int i = 0; i < n; ++i) p.row_class.push_back(cls);
    row += n;
    return r0;
  };

  if (kind == BoundKind::pose) {
    // Single final configuration: parts placed by the skeleton sit at their
    // targets; the last placement's grasp is the only switch constraint left.
    const Action& last = skeleton.actions.back();
    if (last.op != ActionOp::place)
      throw std::invalid_argument("skeleton does not end with a placement");
    for (const auto& a : skeleton.actions)
      if (a.op == ActionOp::place)
        p.static_part_pose[part_idx(tree, a.args[0])] =
            instance.part(a.args[0]).target_pose;
    const int pi = part_idx(tree, last.args[0]);
    p.touches.push_back({0, placer_grip_body, pi, add_rows(RowClass::eq, 1)});
    sched[last.args[0]].place = 0;
  } else {
    for (int k = 1; k <= p.K; ++k) {
      const Action& a = skeleton.actions[k - 1];
      const int s = p.switch_knot(k);
      switch (a.op) {
        case ActionOp::pick: {
          const int pi = part_idx(tree, a.args[1]);
          p.touches.push_back({s, crane_grip_body, pi, add_rows(RowClass::eq, 1)});
          p.events.push_back({s, pi, -1, crane_grip_frame});
          sched[a.args[1]].pick = s;
          break;
        }
        case ActionOp::lift_up: {
          const int pi = part_idx(tree, a.args[0]);
          const double min_z =
              p.static_part_pose[pi].t.z() + instance.margins.lift;
          p.post_lifts.push_back({s, pi, add_rows(RowClass::ineq, 1), min_z});
          sched[a.args[0]].lift = s;
          break;
        }
        case ActionOp::handover: {
          const int pi = part_idx(tree, a.args[1]);
          p.touches.push_back({s, placer_grip_body, pi, add_rows(RowClass::eq, 1)});
          const Pose& target = instance.part(a.args[1]).target_pose;
          p.pre_handovers.push_back({s, placer_grip_body,
                                     add_rows(RowClass::ineq, 5), target.t,
                                     instance.margins.handover_z,
                                     instance.margins.handover_xy});
          p.events.push_back({s, pi, crane_grip_frame, placer_grip_frame});
          sched[a.args[1]].handover = s;
          break;
        }
        case ActionOp::place: {
          const int pi = part_idx(tree, a.args[0]);
          p.fit_poses.push_back({s, pi, add_rows(RowClass::eq, 6),
                                 instance.part(a.args[0]).target_pose});
          p.events.push_back({s, pi, placer_grip_frame, -1});
          sched[a.args[0]].place = s;
          break;
        }
      }
    }
    std::sort(p.events.begin(), p.events.end(),
              [](const auto& a, const auto& b) { return a.knot < b.knot; });
  }

  // Collision pairs with per-knot margin schedules.
  const auto& bodies = tree.bodies();
  const double NaN = std::numeric_limits<double>::quiet_NaN();
  auto is_static_part = [&](const CollisionBody& b) {
    return b.kind == CollisionBody::Kind::part && !sched.count(b.part_id);
  };
  for (size_t a = 0; a < bodies.size(); ++a) {
    for (size_t b = a + 1; b < bodies.size(); ++b) {
      const auto& A = bodies[a];
      const auto& B = bodies[b];
      const bool ga = A.kind == CollisionBody::Kind::ground;
      const bool gb = B.kind == CollisionBody::Kind::ground;
      if (ga && gb) continue;
      const bool static_a = ga || is_static_part(A);
      const bool static_b = gb || is_static_part(B);
      if (static_a && static_b) continue;
      if (A.kind == CollisionBody::Kind::robot_link &&
          B.kind == CollisionBody::Kind::robot_link &&
          A.robot_index == B.robot_index && tree.frames_adjacent(A.frame, B.frame))
        continue;

      PairFeature pf;
      pf.body_a = static_cast<int>(a);
      pf.body_b = static_cast<int>(b);
      pf.margin.assign(p.n_knots, params.safety_margin);
      if (p.knot0_frozen) pf.margin[0] = NaN;  // historic fact, not a decision

      auto clamp_knot = [&](int t) { return std::max(0, std::min(t, p.n_knots - 1)); };
      auto ease = [&](int t0, int t1) {  // [t0, t1] to contact margin
        for (int t = clamp_knot(t0); t <= clamp_knot(t1); ++t)
          if (!std::isnan(pf.margin[t]))
            pf.margin[t] = std::min(pf.margin[t], params.contact_margin);
      };
      auto skip = [&](int t0, int t1) {
        for (int t = clamp_knot(t0); t <= clamp_knot(t1); ++t) pf.margin[t] = NaN;
      };
      const int phase_len = kind == BoundKind::full_path ? phases.n_t : 1;

      auto apply_gripper_part_rules = [&](const CollisionBody& grip,
                                          const CollisionBody& part) {
        if (grip.kind != CollisionBody::Kind::robot_link ||
            part.kind != CollisionBody::Kind::part)
          return;
        auto it = sched.find(part.part_id);
        if (it == sched.end()) return;
        const auto& sc = it->second;
        const bool is_crane_grip = static_cast<int>(a) == crane_grip_body ||
                                   static_cast<int>(b) == crane_grip_body;
        const bool is_placer_grip = static_cast<int>(a) == placer_grip_body ||
                                    static_cast<int>(b) == placer_grip_body;
        if (is_crane_grip && sc.pick >= 0) {
          ease(sc.pick - phase_len + 1, sc.pick - 1);
          const int release = sc.handover >= 0 ? sc.handover : p.n_knots - 1;
          skip(sc.pick, release);
          if (sc.handover >= 0) ease(sc.handover + 1, sc.handover + phase_len);
        }
        if (is_placer_grip) {
          if (sc.handover >= 0) {
            ease(sc.handover - phase_len + 1, sc.handover - 1);
            const int release = sc.place >= 0 ? sc.place : p.n_knots - 1;
            skip(sc.handover, release);
          }
          if (sc.place >= 0) {
            if (sc.handover < 0) skip(sc.place, sc.place);  // pose bound grasp
            ease(sc.place + 1, sc.place + phase_len);
          }
        }
      };
      apply_gripper_part_rules(A, B);
      apply_gripper_part_rules(B, A);

      // Designed target contacts: the placed part approaches its future
      // neighbors (and the ground) to within the rest gap.
      auto apply_target_contact = [&](const CollisionBody& moving,
                                      const CollisionBody& other) {
        if (moving.kind != CollisionBody::Kind::part) return;
        auto it = sched.find(moving.part_id);
        if (it == sched.end() || it->second.place < 0) return;
        bool contact = false;
        if (other.kind == CollisionBody::Kind::ground) {
          contact = graph.ground_contacts.count(moving.part_id) > 0;
        } else if (other.kind == CollisionBody::Kind::part) {
          contact = graph.adjacent(moving.part_id, other.part_id);
        }
        if (!contact) return;
        // Eased from the final descent onward: once placed, the part rests
        // at the designed sub-margin gap for the remainder of the problem.
        ease(it->second.place - phase_len + 1, p.n_knots - 1);
      };
      apply_target_contact(A, B);
      apply_target_contact(B, A);

      bool any = false;
      for (double m : pf.margin) any |= !std::isnan(m);
      if (!any) continue;
      int n_finite = 0;
      for (double m : pf.margin) n_finite += std::isnan(m) ? 0 : 1;
      pf.row0 = add_rows(RowClass::ineq, n_finite);
      p.pairs.push_back(std::move(pf));
    }
  }

  if (kind != BoundKind::pose && p.n_knots >= 3) {
    for (int t = 1; t + 1 < p.n_knots; ++t) p.accel_knots.push_back(t);
    p.accel_row0 = add_rows(RowClass::sos, static_cast<int>(p.accel_knots.size()) * p.dof);
  }
  p.limits_row0 = add_rows(
      RowClass::ineq, (p.n_knots - (p.knot0_frozen ? 1 : 0)) * p.dof * 2);
  p.n_rows = row;
  return p;
}

std::vector<Eigen::VectorXd> constant_init(const CompiledProblem& problem,
                                           const Eigen::VectorXd& q) {
  return std::vector<Eigen::VectorXd>(problem.n_knots, q);
}

std::vector<Eigen::VectorXd> interpolate_switch_knots(
    const CompiledProblem& full_problem,
    const std::vector<Eigen::VectorXd>& seq_knots) {
  if (static_cast<int>(seq_knots.size()) != full_problem.K + 1)
    throw std::invalid_argument("expected K+1 switch knots");
  const int n_t = full_problem.phases.n_t;
  std::vector<Eigen::VectorXd> out(full_problem.n_knots);
  out[0] = seq_knots[0];
  for (int k = 1; k <= full_problem.K; ++k)
    for (int j = 1; j <= n_t; ++j) {
      const double alpha = static_cast<double>(j) / n_t;
      out[(k - 1) * n_t + j] = (1.0 - alpha) * seq_knots[k - 1] + alpha * seq_knots[k];
    }
  return out;
}

}  // namespace asmplan
