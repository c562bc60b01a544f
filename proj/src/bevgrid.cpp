#include "sparseplan/bevgrid.hpp"

#include <algorithm>
#include <cmath>

#include "sparseplan/error.hpp"

namespace sparseplan {

namespace {

Eigen::Index cell_count(double lo, double hi, double cell) {
  return static_cast<Eigen::Index>(std::llround((hi - lo) / cell));
}

}  // namespace

Eigen::Index GridSpec::rows() const { return cell_count(x_min, x_max, cell); }
Eigen::Index GridSpec::cols() const { return cell_count(y_min, y_max, cell); }

void GridSpec::validate() const {
  if (!(cell > 0.0)) throw Error(ErrorCode::Domain, "grid cell must be positive");
  if (!(x_max > x_min) || !(y_max > y_min)) throw Error(ErrorCode::Domain, "grid ranges are empty");
  auto whole = [&](double lo, double hi) {
    const double n = (hi - lo) / cell;
    return std::abs(n - std::round(n)) < 1e-9 * std::max(1.0, n);
  };
  if (!whole(x_min, x_max) || !whole(y_min, y_max)) {
    throw Error(ErrorCode::Domain, "grid ranges are not a whole number of cells");
  }
}

BevGrid::BevGrid(const GridSpec& s) : spec(s), values(Eigen::MatrixXd::Zero(s.rows(), s.cols())) {}

BevGrid::BevGrid(const GridSpec& s, Eigen::MatrixXd v) : spec(s), values(std::move(v)) {
  if (values.rows() != spec.rows() || values.cols() != spec.cols()) {
    throw Error(ErrorCode::Shape, "grid values do not match spec");
  }
}

Eigen::Matrix2Xd ReferenceLine::polyline() const {
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = points[k].point;
  return out;
}

double geo_normalize(double d) {
  if (!(d >= 0.0)) throw Error(ErrorCode::Domain, "distance must be non-negative");
  return std::max(0.0, 1.0 - d / kGeoScale);
}

double geo_distance_for(double score) { return kGeoScale * (1.0 - score); }

BevGrid response_target(const GridSpec& spec, const Trajectory& ego_future) {
  if (ego_future.empty()) throw Error(ErrorCode::EmptyInput, "ego future has no waypoints");
  BevGrid g(spec);
  for (Eigen::Index i = 0; i < g.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.values.cols(); ++j) {
      const Vector2 p = spec.center(i, j);
      const double d = (ego_future.points.colwise() - p).colwise().norm().minCoeff();
      g.values(i, j) = geo_normalize(d);
    }
  }
  return g;
}

ReferenceLine extract_reference_line(const BevGrid& response, double threshold) {
  ReferenceLine line;
  const GridSpec& spec = response.spec;
  for (Eigen::Index i = 0; i < response.values.rows(); ++i) {
    double weight = 0.0;
    double y_sum = 0.0;
    for (Eigen::Index j = 0; j < response.values.cols(); ++j) {
      const double v = response.values(i, j);
      if (v >= threshold && v > 0.0) {
        weight += v;
        y_sum += v * spec.col_y(j);
      }
    }
    if (weight > 0.0) line.points.push_back({i, Vector2(spec.row_x(i), y_sum / weight)});
  }
  return line;
}

BevGrid distance_map(const ReferenceLine& line, const GridSpec& spec) {
  if (!line.usable()) throw Error(ErrorCode::DegenerateLine, "reference line needs at least 2 points");
  const Eigen::Matrix2Xd poly = line.polyline();
  BevGrid g(spec);
  for (Eigen::Index i = 0; i < g.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.values.cols(); ++j) {
      const auto proj = project_to_polyline<double>(spec.center(i, j), poly);
      g.values(i, j) = geo_normalize(proj.distance);
    }
  }
  return g;
}

double sample_geo_score(const BevGrid& m_d, const Vector2& position) {
  const GridSpec& spec = m_d.spec;
  if (!spec.contains(position)) return 0.0;
  const Eigen::Index rows = m_d.values.rows();
  const Eigen::Index cols = m_d.values.cols();
  const double fi = std::clamp((position.x() - spec.x_min) / spec.cell - 0.5, 0.0, static_cast<double>(rows - 1));
  const double fj = std::clamp((position.y() - spec.y_min) / spec.cell - 0.5, 0.0, static_cast<double>(cols - 1));
  const auto i0 = std::min(static_cast<Eigen::Index>(std::floor(fi)), rows - 1);
  const auto j0 = std::min(static_cast<Eigen::Index>(std::floor(fj)), cols - 1);
  const Eigen::Index i1 = std::min(i0 + 1, rows - 1);
  const Eigen::Index j1 = std::min(j0 + 1, cols - 1);
  const double ti = fi - static_cast<double>(i0);
  const double tj = fj - static_cast<double>(j0);
  const auto& v = m_d.values;
  const double s = (1 - ti) * ((1 - tj) * v(i0, j0) + tj * v(i0, j1)) + ti * ((1 - tj) * v(i1, j0) + tj * v(i1, j1));
  return std::clamp(s, 0.0, 1.0);
}

double polyline_geo_score(const BevGrid& m_d, const MapPolyline& poly) {
  double best = 0.0;
  for (int k = 0; k < kMapPoints; ++k) best = std::max(best, sample_geo_score(m_d, poly.points.col(k)));
  return best;
}

ReferenceLine line_from_trajectory(const Trajectory& traj, const GridSpec& spec) {
  ReferenceLine line;
  if (traj.empty()) return line;
  Eigen::Matrix2Xd path(2, traj.size() + 1);
  path.col(0).setZero();
  path.rightCols(traj.size()) = traj.points;
  for (Eigen::Index i = 0; i < spec.rows(); ++i) {
    const double x = spec.row_x(i);
    for (Eigen::Index s = 0; s + 1 < path.cols(); ++s) {
      const double xa = path(0, s);
      const double xb = path(0, s + 1);
      const double lo = std::min(xa, xb);
      const double hi = std::max(xa, xb);
      if (x < lo || x > hi || hi == lo) continue;
      const double f = (x - xa) / (xb - xa);
      const Vector2 p = path.col(s) + f * (path.col(s + 1) - path.col(s));
      if (spec.contains(p)) line.points.push_back({i, p});
      break;
    }
  }
  return line;
}

}  // namespace sparseplan
