#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace sparseplan {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

using Vector2 = Vec2<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  a = std::fmod(a + pi, Scalar(2) * pi);
  if (a <= Scalar(0)) a += Scalar(2) * pi;
  return a - pi;
}

template <typename Scalar>
Scalar cross2(const Vec2<Scalar>& a, const Vec2<Scalar>& b) {
  return a.x() * b.y() - a.y() * b.x();
}

template <typename Scalar>
struct SegmentProjection {
  Vec2<Scalar> closest;
  Scalar t;  // parameter along [a, b] in [0, 1]
  Scalar distance;
};

template <typename Scalar>
SegmentProjection<Scalar> project_to_segment(const Vec2<Scalar>& p, const Vec2<Scalar>& a,
                                             const Vec2<Scalar>& b) {
  const Vec2<Scalar> ab = b - a;
  const Scalar len2 = ab.squaredNorm();
  Scalar t = Scalar(0);
  if (len2 > Scalar(0)) t = std::clamp((p - a).dot(ab) / len2, Scalar(0), Scalar(1));
  const Vec2<Scalar> c = a + t * ab;
  return {c, t, (p - c).norm()};
}

template <typename Scalar>
struct PolylineProjection {
  Vec2<Scalar> closest;
  Scalar distance = std::numeric_limits<Scalar>::infinity();
  Eigen::Index segment = -1;
};

/// Nearest point on the polyline through the columns of `points` (2 x N, N >= 2).
template <typename Scalar, typename Derived>
PolylineProjection<Scalar> project_to_polyline(const Vec2<Scalar>& p,
                                               const Eigen::MatrixBase<Derived>& points) {
  PolylineProjection<Scalar> best;
  for (Eigen::Index s = 0; s + 1 < points.cols(); ++s) {
    const auto proj = project_to_segment<Scalar>(p, points.col(s), points.col(s + 1));
    if (proj.distance < best.distance) {
      best.closest = proj.closest;
      best.distance = proj.distance;
      best.segment = s;
    }
  }
  return best;
}

/// Oriented rectangle in the BEV plane.
template <typename Scalar>
struct BasicObb {
  Vec2<Scalar> center = Vec2<Scalar>::Zero();
  Scalar yaw = Scalar(0);
  Scalar half_length = Scalar(0.5);
  Scalar half_width = Scalar(0.5);

  Vec2<Scalar> axis_long() const { return {std::cos(yaw), std::sin(yaw)}; }
  Vec2<Scalar> axis_lat() const { return {-std::sin(yaw), std::cos(yaw)}; }

  /// Counter-clockwise corners starting front-left.
  std::array<Vec2<Scalar>, 4> corners() const {
    const Vec2<Scalar> l = axis_long() * half_length;
    const Vec2<Scalar> w = axis_lat() * half_width;
    return {center + l + w, center - l + w, center - l - w, center + l - w};
  }

  /// Half extent of the box projected on a unit axis.
  Scalar radius_along(const Vec2<Scalar>& axis) const {
    return half_length * std::abs(axis.dot(axis_long())) + half_width * std::abs(axis.dot(axis_lat()));
  }

  /// Closed containment test.
  bool contains(const Vec2<Scalar>& p) const {
    const Vec2<Scalar> d = p - center;
    return std::abs(d.dot(axis_long())) <= half_length && std::abs(d.dot(axis_lat())) <= half_width;
  }
};

/// Largest gap between the boxes' projections over the four edge normals.
/// Positive means separated by at least that much along some axis; zero or
/// negative means every axis overlaps.
template <typename Scalar>
Scalar obb_separation(const BasicObb<Scalar>& a, const BasicObb<Scalar>& b) {
  const std::array<Vec2<Scalar>, 4> axes = {a.axis_long(), a.axis_lat(), b.axis_long(), b.axis_lat()};
  const Vec2<Scalar> d = b.center - a.center;
  Scalar sep = -std::numeric_limits<Scalar>::infinity();
  for (const auto& axis : axes) {
    const Scalar gap = std::abs(d.dot(axis)) - a.radius_along(axis) - b.radius_along(axis);
    sep = std::max(sep, gap);
  }
  return sep;
}

/// Separating-axis overlap test; touching boxes overlap.
template <typename Scalar>
bool obb_intersects(const BasicObb<Scalar>& a, const BasicObb<Scalar>& b) {
  return obb_separation(a, b) <= Scalar(0);
}

/// Euclidean distance between two boxes, zero when they overlap.
template <typename Scalar>
Scalar obb_distance(const BasicObb<Scalar>& a, const BasicObb<Scalar>& b) {
  if (obb_intersects(a, b)) return Scalar(0);
  const auto ca = a.corners();
  const auto cb = b.corners();
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, project_to_segment<Scalar>(ca[i], cb[j], cb[(j + 1) % 4]).distance);
      best = std::min(best, project_to_segment<Scalar>(cb[i], ca[j], ca[(j + 1) % 4]).distance);
    }
  }
  return best;
}

}  // namespace sparseplan
