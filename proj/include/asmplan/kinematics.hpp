// Kinematic world model: articulated robots, rigid part attachments,
// forward kinematics, Jacobians and collision queries.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asmplan/geometry.hpp"

namespace asmplan {

enum class JointKind { prismatic, revolute };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::revolute;
  Vec3 axis{0, 0, 1};
  double lo = 0.0, hi = 0.0;
  Pose offset;  // fixed transform from parent frame to this joint's origin
};

struct LinkBox {
  std::string name;
  int joint_index = -1;  // -1: attached to the base frame
  BoxShape box;
  Pose local;
};

struct RobotModel {
  std::string name;
  Pose base_pose;
  std::vector<JointSpec> joints;
  Pose gripper_offset;  // fixed transform from the last joint frame
  BoxShape gripper_box;
  std::vector<LinkBox> link_boxes;

  int dof() const { return static_cast<int>(joints.size()); }
};

struct Part {
  std::string id;
  BoxShape shape;
  Pose storage_pose;
  Pose target_pose;
  double mass = 1.0;
  bool placed_at_start = false;
};

enum class ParentKind { world_storage, world_placed, gripper };

struct Attachment {
  ParentKind kind = ParentKind::world_storage;
  std::string robot;  // valid when kind == gripper
  Pose relative;      // pose of the part in the parent frame
};

struct Configuration {
  Eigen::VectorXd q;
  std::map<std::string, Attachment> attachments;  // part id -> attachment
};

// A frame of the tree. Pose = parent_pose * local * joint_motion(q[q_index]).
struct Frame {
  std::string name;
  int parent = -1;
  Pose local;
  std::optional<JointKind> joint_kind;
  Vec3 joint_axis{0, 0, 1};
  int q_index = -1;
  double q_lo = 0.0, q_hi = 0.0;
};

struct CollisionBody {
  enum class Kind { robot_link, part, ground };
  Kind kind = Kind::part;
  std::string name;
  int frame = -1;       // robot_link: owning frame
  Pose local;           // robot_link: box pose in the frame
  std::string part_id;  // part
  BoxShape box;
  int robot_index = -1;  // robot_link: owning robot
};

struct FkResult {
  std::vector<Pose> frame_poses;              // indexed like tree frames
  std::map<std::string, Pose> part_poses;     // part id -> world pose
};

struct CollisionPairReport {
  std::string body_a, body_b;
  double distance = 0.0;
};

class KinematicTree {
 public:
  KinematicTree() = default;
  KinematicTree(const std::vector<RobotModel>& robots,
                const std::vector<Part>& parts, double ground_z);

  int dof() const { return dof_; }
  double ground_z() const { return ground_z_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const std::vector<RobotModel>& robots() const { return robots_; }
  const std::vector<Part>& parts() const { return parts_; }
  const Part& part(const std::string& id) const;

  int frame_index(const std::string& name) const;
  int gripper_frame(const std::string& robot) const;
  // Joint vector slots [first, first+dof) of a robot.
  int robot_q_offset(int robot_index) const { return q_offsets_[robot_index]; }
  int robot_index(const std::string& name) const;

  Eigen::VectorXd joint_lower() const;
  Eigen::VectorXd joint_upper() const;
  bool within_limits(const Eigen::VectorXd& q, double tol = 1e-9) const;

  // World poses of frames only (parts need an attachment map).
  std::vector<Pose> frame_fk(const Eigen::VectorXd& q) const;
  FkResult forward_kinematics(const Configuration& cfg) const;

  // Position Jacobian of the material point of `frame` currently at world
  // point p (3 x dof), given frame poses from frame_fk.
  Eigen::Matrix3Xd point_jacobian(int frame, const Vec3& p,
                                  const std::vector<Pose>& poses) const;
  // Angular velocity Jacobian of `frame` (3 x dof).
  Eigen::Matrix3Xd angular_jacobian(int frame,
                                    const std::vector<Pose>& poses) const;

  // Rigidly re-parents a part, preserving its world pose.
  Configuration reattach(const Configuration& cfg, const std::string& part,
                         const Attachment& new_parent_kind) const;

  const std::vector<CollisionBody>& bodies() const { return bodies_; }
  // True iff frames are chain-adjacent (parent/child, possibly through
  // fixed intermediate frames) within the same robot.
  bool frames_adjacent(int fa, int fb) const;

  // Checks every non-exempt body pair for signed distance >= -margin.
  // Exempt: robot-link pairs on adjacent frames, gripper vs held part,
  // and static-static pairs are skipped only when `skip_static_pairs`.
  bool collision_free(const Configuration& cfg, double margin,
                      std::vector<CollisionPairReport>* offending = nullptr,
                      bool skip_static_pairs = false) const;

 private:
  std::vector<Frame> frames_;
  std::vector<RobotModel> robots_;
  std::vector<Part> parts_;
  std::map<std::string, int> part_index_;
  std::map<std::string, int> frame_by_name_;
  std::vector<int> gripper_frames_;  // per robot
  std::vector<int> q_offsets_;       // per robot
  std::vector<CollisionBody> bodies_;
  int dof_ = 0;
  double ground_z_ = 0.0;
};

// World pose of a part under an attachment, given frame poses.
Pose part_world_pose(const KinematicTree& tree, const Attachment& att,
                     const std::vector<Pose>& frame_poses);

}  // namespace asmplan
