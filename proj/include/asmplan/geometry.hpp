// Rigid-body poses and box geometry: distance, penetration, contact patches.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

namespace asmplan {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

struct Pose {
  Vec3 t{0.0, 0.0, 0.0};
  Quat q{1.0, 0.0, 0.0, 0.0};  // w, x, y, z

  static Pose Identity() { return Pose{}; }
  static Pose Translation(double x, double y, double z) {
    return Pose{Vec3(x, y, z), Quat::Identity()};
  }
  static Pose TranslationZRot(double x, double y, double z, double yaw) {
    return Pose{Vec3(x, y, z), Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
  }

  // Composition; result quaternion is renormalized.
  Pose operator*(const Pose& o) const {
    Pose r;
    r.t = t + q * o.t;
    r.q = (q * o.q).normalized();
    return r;
  }
  Pose inverse() const {
    Pose r;
    r.q = q.conjugate();
    r.t = -(r.q * t);
    return r;
  }
  Vec3 apply(const Vec3& p) const { return t + q * p; }
  Mat3 rot() const { return q.toRotationMatrix(); }

  bool approx_equal(const Pose& o, double tol) const {
    double rot_err = 1.0 - std::abs(q.dot(o.q));
    return (t - o.t).norm() <= tol && rot_err <= tol;
  }
};

struct BoxShape {
  Vec3 half{0.1, 0.1, 0.1};  // half extents, all > 0
};

struct Aabb {
  Vec3 lo, hi;
  // Lower bound on the distance between two boxes' AABBs (0 if overlapping).
  double gap(const Aabb& o) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      double d = std::max(lo[i] - o.hi[i], o.lo[i] - hi[i]);
      if (d > 0.0) s += d * d;
    }
    return std::sqrt(s);
  }
};

Aabb box_aabb(const BoxShape& s, const Pose& p);
std::array<Vec3, 8> box_vertices(const BoxShape& s, const Pose& p);

// Witness information of a box-box distance query.
//   d > 0: separation distance, witnesses are the closest points.
//   d = 0: touching.
//   d < 0: penetration depth along the minimal-translation face axis.
// `normal` points from body a toward body b (unit).
struct DistanceResult {
  double d = 0.0;
  Vec3 point_a{0, 0, 0};
  Vec3 point_b{0, 0, 0};
  Vec3 normal{0, 0, 1};
  bool penetrating = false;
  // Set when the result came from a face axis (penetration or degenerate
  // touch): which body owns the axis (0 = a, 1 = b) and its local axis index.
  int axis_owner = -1;
  int axis_index = -1;
};

DistanceResult box_distance(const BoxShape& a, const Pose& pa,
                            const BoxShape& b, const Pose& pb);

inline double signed_distance(const BoxShape& a, const Pose& pa,
                              const BoxShape& b, const Pose& pb) {
  return box_distance(a, pa, b, pb).d;
}

// Distance of a box to the half space z <= ground_z. Negative = penetration.
DistanceResult box_ground_distance(const BoxShape& s, const Pose& p,
                                   double ground_z);

// Centroid of the contact region between two boxes whose signed distance is
// within `tol` of touching. Face-face contacts yield the centroid of the
// clipped overlap polygon; lower-dimensional contacts fall back to the
// witness midpoint. nullopt when the boxes are farther than tol apart.
std::optional<Vec3> contact_patch_centroid(const BoxShape& a, const Pose& pa,
                                           const BoxShape& b, const Pose& pb,
                                           double tol);

// Centroid of the region where the box rests on the ground plane.
std::optional<Vec3> ground_patch_centroid(const BoxShape& s, const Pose& p,
                                          double ground_z, double tol);

}  // namespace asmplan
