#include "asmplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asmplan {

namespace {

// Closest point on a segment pair; standard clamped formulation.
void segment_segment_closest(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                             const Vec3& q2, Vec3& c1, Vec3& c2) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s, t;
  const double eps = 1e-14;
  if (a <= eps && e <= eps) {
    s = t = 0.0;
  } else if (a <= eps) {
    s = 0.0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      t = 0.0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + d1 * s;
  c2 = p2 + d2 * t;
}

Vec3 closest_point_on_box(const Vec3& p, const BoxShape& s, const Pose& pose) {
  const Vec3 local = pose.inverse().apply(p);
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(local[i], -s.half[i], s.half[i]);
  return pose.apply(c);
}

constexpr int kEdgePairs[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x-aligned
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y-aligned
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z-aligned
};

// Interval gap of the two boxes projected on a unit axis.
double axis_gap(const Vec3& u, const Vec3& c, const Mat3& ra, const Vec3& ha,
                const Mat3& rb, const Vec3& hb) {
  double r1 = 0.0, r2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    r1 += ha[i] * std::abs(u.dot(ra.col(i)));
    r2 += hb[i] * std::abs(u.dot(rb.col(i)));
  }
  return std::abs(u.dot(c)) - r1 - r2;
}

struct Face {
  std::array<Vec3, 4> corners;  // world, counter-clockwise around outward normal
};

Face box_face(const BoxShape& s, const Pose& p, int axis, double sign) {
  const int i = axis, j = (axis + 1) % 3, k = (axis + 2) % 3;
  Vec3 n = Vec3::Zero(), a = Vec3::Zero(), b = Vec3::Zero();
  n[i] = sign * s.half[i];
  a[j] = s.half[j];
  b[k] = s.half[k];
  Face f;
  f.corners[0] = p.apply(n + a + b);
  f.corners[1] = p.apply(n - a + b);
  f.corners[2] = p.apply(n - a - b);
  f.corners[3] = p.apply(n + a - b);
  return f;
}

using Poly2 = std::vector<Eigen::Vector2d>;

// Sutherland-Hodgman clip of a convex polygon against the half plane
// n.dot(x) <= c.
Poly2 clip_halfplane(const Poly2& poly, const Eigen::Vector2d& n, double c) {
  Poly2 out;
  const size_t m = poly.size();
  for (size_t i = 0; i < m; ++i) {
    const auto& cur = poly[i];
    const auto& nxt = poly[(i + 1) % m];
    const double dc = n.dot(cur) - c;
    const double dn = n.dot(nxt) - c;
    if (dc <= 0.0) out.push_back(cur);
    if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
      const double s = dc / (dc - dn);
      out.push_back(cur + s * (nxt - cur));
    }
  }
  return out;
}

std::optional<Eigen::Vector2d> convex_poly_centroid(const Poly2& poly) {
  if (poly.size() < 3) return std::nullopt;
  double area2 = 0.0;
  Eigen::Vector2d c(0, 0);
  for (size_t i = 1; i + 1 < poly.size(); ++i) {
    const Eigen::Vector2d a = poly[i] - poly[0];
    const Eigen::Vector2d b = poly[i + 1] - poly[0];
    const double cross = a.x() * b.y() - a.y() * b.x();
    area2 += cross;
    c += cross * (poly[0] + poly[i] + poly[i + 1]) / 3.0;
  }
  if (std::abs(area2) < 1e-12) return std::nullopt;
  return Eigen::Vector2d(c / area2);
}

}  // namespace

Aabb box_aabb(const BoxShape& s, const Pose& p) {
  const Mat3 r = p.rot();
  Vec3 ext;
  for (int i = 0; i < 3; ++i)
    ext[i] = std::abs(r(i, 0)) * s.half[0] + std::abs(r(i, 1)) * s.half[1] +
             std::abs(r(i, 2)) * s.half[2];
  return Aabb{p.t - ext, p.t + ext};
}

std::array<Vec3, 8> box_vertices(const BoxShape& s, const Pose& p) {
  std::array<Vec3, 8> v;
  int n = 0;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        Vec3 local(i ? s.half[0] : -s.half[0], j ? s.half[1] : -s.half[1],
                   k ? s.half[2] : -s.half[2]);
        v[n++] = p.apply(local);
      }
  return v;
}

DistanceResult box_distance(const BoxShape& a, const Pose& pa,
                            const BoxShape& b, const Pose& pb) {
  const Mat3 ra = pa.rot(), rb = pb.rot();
  const Vec3 c = pb.t - pa.t;

  // Separating-axis sweep: 6 face axes + 9 edge cross products.
  double best_face_gap = -std::numeric_limits<double>::infinity();
  int best_owner = -1, best_index = -1;
  bool separated = false;
  for (int owner = 0; owner < 2 && !separated; ++owner) {
    const Mat3& r = owner == 0 ? ra : rb;
    for (int i = 0; i < 3; ++i) {
      const Vec3 u = r.col(i);
      const double gap = axis_gap(u, c, ra, a.half, rb, b.half);
      if (gap > best_face_gap) {
        best_face_gap = gap;
        best_owner = owner;
        best_index = i;
      }
      if (gap >= 0.0) separated = true;
    }
  }
  if (!separated) {
    for (int i = 0; i < 3 && !separated; ++i)
      for (int j = 0; j < 3; ++j) {
        Vec3 u = ra.col(i).cross(rb.col(j));
        const double len = u.norm();
        if (len < 1e-10) continue;
        u /= len;
        if (axis_gap(u, c, ra, a.half, rb, b.half) >= 0.0) {
          separated = true;
          break;
        }
      }
  }

  DistanceResult res;
  if (!separated) {
    // Penetrating: depth from the minimal-translation face axis.
    res.penetrating = true;
    res.d = best_face_gap;  // negative
    res.axis_owner = best_owner;
    res.axis_index = best_index;
    const Mat3& r_own = best_owner == 0 ? ra : rb;
    Vec3 u = r_own.col(best_index);
    if (u.dot(c) < 0.0) u = -u;  // orient a -> b
    res.normal = u;
    // Witness: deepest point of the other body along -u (resp. +u), projected
    // onto the owner's face plane.
    if (best_owner == 0) {
      Vec3 pb_w = pb.t;
      for (int j = 0; j < 3; ++j)
        pb_w -= b.half[j] * ((u.dot(rb.col(j)) >= 0.0) ? 1.0 : -1.0) * rb.col(j);
      res.point_b = pb_w;
      res.point_a = pb_w - res.d * u;
    } else {
      Vec3 pa_w = pa.t;
      for (int j = 0; j < 3; ++j)
        pa_w += a.half[j] * ((u.dot(ra.col(j)) >= 0.0) ? 1.0 : -1.0) * ra.col(j);
      res.point_a = pa_w;
      res.point_b = pa_w + res.d * u;
    }
    return res;
  }

  // Disjoint (or touching): exact distance over the feature pairs.
  const auto va = box_vertices(a, pa);
  const auto vb = box_vertices(b, pb);
  double best = std::numeric_limits<double>::infinity();
  Vec3 wa, wb;
  for (const auto& v : va) {
    const Vec3 cb = closest_point_on_box(v, b, pb);
    const double d = (v - cb).norm();
    if (d < best) {
      best = d;
      wa = v;
      wb = cb;
    }
  }
  for (const auto& v : vb) {
    const Vec3 ca = closest_point_on_box(v, a, pa);
    const double d = (v - ca).norm();
    if (d < best) {
      best = d;
      wa = ca;
      wb = v;
    }
  }
  for (const auto& ea : kEdgePairs)
    for (const auto& eb : kEdgePairs) {
      Vec3 c1, c2;
      segment_segment_closest(va[ea[0]], va[ea[1]], vb[eb[0]], vb[eb[1]], c1, c2);
      const double d = (c1 - c2).norm();
      if (d < best) {
        best = d;
        wa = c1;
        wb = c2;
      }
    }
  res.d = best;
  res.point_a = wa;
  res.point_b = wb;
  if (best > 1e-12) {
    res.normal = (wb - wa) / best;
  } else {
    // Touching: use the best separating face axis for a well-defined normal.
    const Mat3& r_own = best_owner == 0 ? ra : rb;
    Vec3 u = r_own.col(best_index);
    if (u.dot(c) < 0.0) u = -u;
    res.normal = u;
    res.axis_owner = best_owner;
    res.axis_index = best_index;
  }
  return res;
}

DistanceResult box_ground_distance(const BoxShape& s, const Pose& p,
                                   double ground_z) {
  const auto verts = box_vertices(s, p);
  double zmin = std::numeric_limits<double>::infinity();
  Vec3 lowest;
  for (const auto& v : verts)
    if (v.z() < zmin) {
      zmin = v.z();
      lowest = v;
    }
  DistanceResult res;
  res.d = zmin - ground_z;
  res.penetrating = res.d < 0.0;
  res.point_a = lowest;  // a = box
  res.point_b = Vec3(lowest.x(), lowest.y(), ground_z);
  res.normal = Vec3(0, 0, -1);  // from box toward ground
  return res;
}

std::optional<Vec3> contact_patch_centroid(const BoxShape& a, const Pose& pa,
                                           const BoxShape& b, const Pose& pb,
                                           double tol) {
  const DistanceResult dr = box_distance(a, pa, b, pb);
  if (dr.d > tol) return std::nullopt;
  const Vec3 mid = 0.5 * (dr.point_a + dr.point_b);

  // Try a face-face overlap polygon in the contact plane.
  const Vec3 n = dr.normal;
  const Mat3 ra = pa.rot(), rb = pb.rot();
  int ia = 0, ib = 0;
  double da = -2.0, db = -2.0;
  double sa = 1.0, sb = 1.0;
  for (int i = 0; i < 3; ++i) {
    const double ca = n.dot(ra.col(i));
    if (std::abs(ca) > da) {
      da = std::abs(ca);
      ia = i;
      sa = ca >= 0.0 ? 1.0 : -1.0;
    }
    const double cb = (-n).dot(rb.col(i));
    if (std::abs(cb) > db) {
      db = std::abs(cb);
      ib = i;
      sb = cb >= 0.0 ? 1.0 : -1.0;
    }
  }
  const Face fa = box_face(a, pa, ia, sa);
  const Face fb = box_face(b, pb, ib, sb);

  // Project both onto the plane through mid with normal n.
  Vec3 e1 = n.cross(std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX());
  e1.normalize();
  const Vec3 e2 = n.cross(e1);
  auto project = [&](const Face& f) {
    Poly2 poly;
    for (const auto& cpt : f.corners)
      poly.push_back(Eigen::Vector2d(e1.dot(cpt - mid), e2.dot(cpt - mid)));
    return poly;
  };
  Poly2 poly_a = project(fa);
  const Poly2 poly_b = project(fb);
  // Ensure CCW orientation of the clip polygon.
  {
    double area2 = 0.0;
    for (size_t i = 0; i < poly_b.size(); ++i) {
      const auto& p0 = poly_b[i];
      const auto& p1 = poly_b[(i + 1) % poly_b.size()];
      area2 += p0.x() * p1.y() - p0.y() * p1.x();
    }
    Poly2 clip = poly_b;
    if (area2 < 0.0) std::reverse(clip.begin(), clip.end());
    for (size_t i = 0; i < clip.size() && !poly_a.empty(); ++i) {
      const auto& p0 = clip[i];
      const auto& p1 = clip[(i + 1) % clip.size()];
      const Eigen::Vector2d edge = p1 - p0;
      const Eigen::Vector2d nrm(edge.y(), -edge.x());  // outward for CCW
      poly_a = clip_halfplane(poly_a, nrm, nrm.dot(p0));
    }
  }
  if (const auto c2 = convex_poly_centroid(poly_a)) {
    return mid + c2->x() * e1 + c2->y() * e2;
  }
  return mid;  // degenerate contact: witness midpoint
}

std::optional<Vec3> ground_patch_centroid(const BoxShape& s, const Pose& p,
                                          double ground_z, double tol) {
  const auto verts = box_vertices(s, p);
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& v : verts) zmin = std::min(zmin, v.z());
  if (zmin - ground_z > tol) return std::nullopt;
  // Average the local vertex offsets of all touching vertices; symmetric
  // offset sets cancel exactly so a flat-resting box yields its center.
  Vec3 sum = Vec3::Zero();
  int count = 0;
  int n = 0;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        if (verts[n].z() - ground_z <= (zmin - ground_z) + tol) {
          Vec3 local(i ? s.half[0] : -s.half[0], j ? s.half[1] : -s.half[1],
                     k ? s.half[2] : -s.half[2]);
          sum += p.q * local;
          ++count;
        }
        ++n;
      }
  Vec3 c = p.t + sum / count;
  c.z() = ground_z;
  return c;
}

}  // namespace asmplan
