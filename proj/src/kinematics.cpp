#include "asmplan/kinematics.hpp"

#include <Eigen/Geometry>
#include <stdexcept>

namespace asmplan {

namespace {
Pose joint_motion(JointKind kind, const Vec3& axis, double q) {
  Pose m;
  if (kind == JointKind::prismatic) {
    m.t = axis * q;
  } else {
    m.q = Quat(Eigen::AngleAxisd(q, axis)).normalized();
  }
  return m;
}
}  // namespace

KinematicTree::KinematicTree(const std::vector<RobotModel>& robots,
                             const std::vector<Part>& parts, double ground_z)
    : robots_(robots), parts_(parts), ground_z_(ground_z) {
  frames_.push_back(Frame{"world", -1, Pose{}, std::nullopt, Vec3::UnitZ(), -1, 0, 0});
  for (size_t r = 0; r < robots_.size(); ++r) {
    const auto& rm = robots_[r];
    q_offsets_.push_back(dof_);
    Frame base;
    base.name = rm.name + "/base";
    base.parent = 0;
    base.local = rm.base_pose;
    frames_.push_back(base);
    int parent = static_cast<int>(frames_.size()) - 1;
    const int base_frame = parent;
    for (const auto& js : rm.joints) {
      Frame f;
      f.name = rm.name + "/" + js.name;
      f.parent = parent;
      f.local = js.offset;
      f.joint_kind = js.kind;
      f.joint_axis = js.axis.normalized();
      f.q_index = dof_++;
      f.q_lo = js.lo;
      f.q_hi = js.hi;
      frames_.push_back(f);
      parent = static_cast<int>(frames_.size()) - 1;
    }
    Frame grip;
    grip.name = rm.name + "/gripper";
    grip.parent = parent;
    grip.local = rm.gripper_offset;
    frames_.push_back(grip);
    gripper_frames_.push_back(static_cast<int>(frames_.size()) - 1);

    CollisionBody gb;
    gb.kind = CollisionBody::Kind::robot_link;
    gb.name = rm.name + "/gripper";
    gb.frame = gripper_frames_.back();
    gb.box = rm.gripper_box;
    gb.robot_index = static_cast<int>(r);
    bodies_.push_back(gb);
    for (const auto& lb : rm.link_boxes) {
      CollisionBody cb;
      cb.kind = CollisionBody::Kind::robot_link;
      cb.name = rm.name + "/" + lb.name;
      cb.frame = lb.joint_index < 0 ? base_frame : base_frame + 1 + lb.joint_index;
      cb.local = lb.local;
      cb.box = lb.box;
      cb.robot_index = static_cast<int>(r);
      bodies_.push_back(cb);
    }
  }
  for (size_t i = 0; i < parts_.size(); ++i) {
    if (part_index_.count(parts_[i].id))
      throw std::invalid_argument("duplicate part id: " + parts_[i].id);
    part_index_[parts_[i].id] = static_cast<int>(i);
    CollisionBody cb;
    cb.kind = CollisionBody::Kind::part;
    cb.name = parts_[i].id;
    cb.part_id = parts_[i].id;
    cb.box = parts_[i].shape;
    bodies_.push_back(cb);
  }
  CollisionBody ground;
  ground.kind = CollisionBody::Kind::ground;
  ground.name = "ground";
  bodies_.push_back(ground);
  for (size_t i = 0; i < frames_.size(); ++i) frame_by_name_[frames_[i].name] = static_cast<int>(i);
}

const Part& KinematicTree::part(const std::string& id) const {
  auto it = part_index_.find(id);
  if (it == part_index_.end()) throw std::invalid_argument("unknown part: " + id);
  return parts_[it->second];
}

int KinematicTree::frame_index(const std::string& name) const {
  auto it = frame_by_name_.find(name);
  if (it == frame_by_name_.end()) throw std::invalid_argument("unknown frame: " + name);
  return it->second;
}

int KinematicTree::gripper_frame(const std::string& robot) const {
  return gripper_frames_[robot_index(robot)];
}

int KinematicTree::robot_index(const std::string& name) const {
  for (size_t r = 0; r < robots_.size(); ++r)
    if (robots_[r].name == name) return static_cast<int>(r);
  throw std::invalid_argument("unknown robot: " + name);
}

Eigen::VectorXd KinematicTree::joint_lower() const {
  Eigen::VectorXd lo(dof_);
  for (const auto& f : frames_)
    if (f.q_index >= 0) lo[f.q_index] = f.q_lo;
  return lo;
}

Eigen::VectorXd KinematicTree::joint_upper() const {
  Eigen::VectorXd hi(dof_);
  for (const auto& f : frames_)
    if (f.q_index >= 0) hi[f.q_index] = f.q_hi;
  return hi;
}

bool KinematicTree::within_limits(const Eigen::VectorXd& q, double tol) const {
  for (const auto& f : frames_)
    if (f.q_index >= 0 && (q[f.q_index] < f.q_lo - tol || q[f.q_index] > f.q_hi + tol))
      return false;
  return true;
}

std::vector<Pose> KinematicTree::frame_fk(const Eigen::VectorXd& q) const {
  if (q.size() != dof_)
    throw std::invalid_argument("configuration dimension mismatch: expected " +
                                std::to_string(dof_) + ", got " +
                                std::to_string(q.size()));
  std::vector<Pose> poses(frames_.size());
  for (size_t i = 1; i < frames_.size(); ++i) {
    const Frame& f = frames_[i];
    Pose p = poses[f.parent] * f.local;
    if (f.joint_kind) p = p * joint_motion(*f.joint_kind, f.joint_axis, q[f.q_index]);
    poses[i] = p;
  }
  return poses;
}

Pose part_world_pose(const KinematicTree& tree, const Attachment& att,
                     const std::vector<Pose>& frame_poses) {
  if (att.kind == ParentKind::gripper)
    return frame_poses[tree.gripper_frame(att.robot)] * att.relative;
  return att.relative;
}

FkResult KinematicTree::forward_kinematics(const Configuration& cfg) const {
  FkResult r;
  r.frame_poses = frame_fk(cfg.q);
  for (const auto& [id, att] : cfg.attachments) {
    if (!part_index_.count(id)) throw std::invalid_argument("unknown part: " + id);
    r.part_poses[id] = part_world_pose(*this, att, r.frame_poses);
  }
  return r;
}

Eigen::Matrix3Xd KinematicTree::point_jacobian(int frame, const Vec3& p,
                                               const std::vector<Pose>& poses) const {
  Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, dof_);
  int i = frame;
  while (i > 0) {
    const Frame& f = frames_[i];
    if (f.joint_kind) {
      // World axis of the joint: the joint motion is applied after `local`,
      // so the axis lives in the frame reached by parent*local.
      const Pose pre = poses[f.parent] * f.local;
      const Vec3 axis_w = pre.q * f.joint_axis;
      if (*f.joint_kind == JointKind::prismatic) {
        J.col(f.q_index) += axis_w;
      } else {
        J.col(f.q_index) += axis_w.cross(p - pre.t);
      }
    }
    i = f.parent;
  }
  return J;
}

Eigen::Matrix3Xd KinematicTree::angular_jacobian(int frame,
                                                 const std::vector<Pose>& poses) const {
  Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, dof_);
  int i = frame;
  while (i > 0) {
    const Frame& f = frames_[i];
    if (f.joint_kind && *f.joint_kind == JointKind::revolute) {
      const Pose pre = poses[f.parent] * f.local;
      J.col(f.q_index) += pre.q * f.joint_axis;
    }
    i = f.parent;
  }
  return J;
}

Configuration KinematicTree::reattach(const Configuration& cfg,
                                      const std::string& part,
                                      const Attachment& new_parent) const {
  auto it = cfg.attachments.find(part);
  if (it == cfg.attachments.end())
    throw std::invalid_argument("part has no attachment: " + part);
  if (new_parent.kind == ParentKind::gripper) {
    for (const auto& [id, att] : cfg.attachments)
      if (id != part && att.kind == ParentKind::gripper && att.robot == new_parent.robot)
        throw std::runtime_error("mode conflict: gripper of " + new_parent.robot +
                                 " already holds " + id);
  }
  const auto poses = frame_fk(cfg.q);
  const Pose world = part_world_pose(*this, it->second, poses);
  Configuration out = cfg;
  Attachment att = new_parent;
  if (att.kind == ParentKind::gripper) {
    const Pose g = poses[gripper_frame(att.robot)];
    att.relative = g.inverse() * world;
  } else {
    att.relative = world;
  }
  out.attachments[part] = att;
  return out;
}

bool KinematicTree::frames_adjacent(int fa, int fb) const {
  if (fa == fb) return true;
  // Walk up through fixed frames: two link frames are adjacent when one is
  // reachable from the other crossing at most one joint.
  auto hops = [&](int from, int to) {
    int i = from, joints = 0;
    while (i >= 0) {
      if (i == to) return joints;
      if (frames_[i].joint_kind) ++joints;
      if (joints > 1) return 99;
      i = frames_[i].parent;
    }
    return 99;
  };
  return hops(fa, fb) <= 1 || hops(fb, fa) <= 1;
}

bool KinematicTree::collision_free(const Configuration& cfg, double margin,
                                   std::vector<CollisionPairReport>* offending,
                                   bool skip_static_pairs) const {
  if (margin < 0.0) throw std::invalid_argument("margin must be >= 0");
  const auto poses = frame_fk(cfg.q);
  struct WorldBody {
    const CollisionBody* body;
    Pose pose;
    Aabb aabb;
    bool moving = true;
    const Attachment* att = nullptr;
  };
  std::vector<WorldBody> wb;
  wb.reserve(bodies_.size());
  for (const auto& b : bodies_) {
    WorldBody w;
    w.body = &b;
    switch (b.kind) {
      case CollisionBody::Kind::robot_link:
        w.pose = poses[b.frame] * b.local;
        break;
      case CollisionBody::Kind::part: {
        auto it = cfg.attachments.find(b.part_id);
        if (it == cfg.attachments.end()) continue;  // part not in the scene
        w.att = &it->second;
        w.pose = part_world_pose(*this, *w.att, poses);
        w.moving = w.att->kind == ParentKind::gripper;
        break;
      }
      case CollisionBody::Kind::ground:
        w.moving = false;
        break;
    }
    if (b.kind != CollisionBody::Kind::ground) w.aabb = box_aabb(w.body->box, w.pose);
    wb.push_back(w);
  }

  bool ok = true;
  for (size_t i = 0; i < wb.size(); ++i) {
    for (size_t j = i + 1; j < wb.size(); ++j) {
      const auto& A = wb[i];
      const auto& B = wb[j];
      if (A.body->kind == CollisionBody::Kind::ground &&
          B.body->kind == CollisionBody::Kind::ground)
        continue;
      if (skip_static_pairs && !A.moving && !B.moving) continue;
      // Exemptions: adjacent link frames within one robot; gripper vs held part.
      if (A.body->kind == CollisionBody::Kind::robot_link &&
          B.body->kind == CollisionBody::Kind::robot_link) {
        if (A.body->robot_index == B.body->robot_index &&
            frames_adjacent(A.body->frame, B.body->frame))
          continue;
      }
      auto held_exempt = [&](const WorldBody& link, const WorldBody& part) {
        return link.body->kind == CollisionBody::Kind::robot_link &&
               part.att && part.att->kind == ParentKind::gripper &&
               link.body->robot_index == robot_index(part.att->robot) ;
      };
      if ((B.body->kind == CollisionBody::Kind::part && held_exempt(A, B)) ||
          (A.body->kind == CollisionBody::Kind::part && held_exempt(B, A)))
        continue;

      double d;
      if (A.body->kind == CollisionBody::Kind::ground ||
          B.body->kind == CollisionBody::Kind::ground) {
        const auto& box = A.body->kind == CollisionBody::Kind::ground ? B : A;
        d = box_ground_distance(box.body->box, box.pose, ground_z_).d;
      } else {
        if (A.aabb.gap(B.aabb) > margin) continue;
        d = box_distance(A.body->box, A.pose, B.body->box, B.pose).d;
      }
      if (d < -margin) {
        ok = false;
        if (!offending) return false;
        offending->push_back({A.body->name, B.body->name, d});
      }
    }
  }
  return ok;
}

}  // namespace asmplan
