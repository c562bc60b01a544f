#pragma once

#include <Eigen/Core>
#include <vector>

#include "sparseplan/geometry.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan {

/// Regular BEV lattice. Rows run along x (longitudinal), columns along y.
struct GridSpec {
  double x_min = -30.0;
  double x_max = 30.0;
  double y_min = -15.0;
  double y_max = 15.0;
  double cell = 0.5;

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  double row_x(Eigen::Index i) const { return x_min + (static_cast<double>(i) + 0.5) * cell; }
  double col_y(Eigen::Index j) const { return y_min + (static_cast<double>(j) + 0.5) * cell; }
  Vector2 center(Eigen::Index i, Eigen::Index j) const { return {row_x(i), col_y(j)}; }
  bool contains(const Vector2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }

  /// Throws a domain error unless cell > 0 and the ranges hold a whole number of cells.
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Scalar field over a GridSpec; values(i, j) is the cell at row i, column j.
struct BevGrid {
  GridSpec spec;
  Eigen::MatrixXd values;

  BevGrid() = default;
  explicit BevGrid(const GridSpec& s);
  BevGrid(const GridSpec& s, Eigen::MatrixXd v);
};

struct ReferencePoint {
  Eigen::Index row;
  Vector2 point;
};

struct ReferenceLine {
  std::vector<ReferencePoint> points;

  std::size_t size() const { return points.size(); }
  bool usable() const { return points.size() >= 2; }
  /// Reference points as a 2 x N matrix in row order.
  Eigen::Matrix2Xd polyline() const;
};

/// Maps a distance in meters to a geometric score: max(0, 1 - d / 30).
double geo_normalize(double d);

/// Distance at which geo_normalize reaches `score`.
double geo_distance_for(double score);

inline constexpr double kGeoScale = 30.0;

BevGrid response_target(const GridSpec& spec, const Trajectory& ego_future);

ReferenceLine extract_reference_line(const BevGrid& response, double threshold = 0.9);

BevGrid distance_map(const ReferenceLine& line, const GridSpec& spec);

/// Bilinear sample of the grid, zero outside the spec extent.
double sample_geo_score(const BevGrid& m_d, const Vector2& position);

/// Max of sample_geo_score over the polyline's points.
double polyline_geo_score(const BevGrid& m_d, const MapPolyline& poly);

/// Reference line resampled from a trajectory at each row center its x-span
/// covers, starting from the ego origin. Used to rebuild the line from a
/// refined plan.
ReferenceLine line_from_trajectory(const Trajectory& traj, const GridSpec& spec);

}  // namespace sparseplan
