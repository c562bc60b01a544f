#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "sparseplan/geometry.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan {

using ObbPose = BasicObb<double>;
using HorizonValues = std::array<double, 3>;

/// Evaluation horizons in seconds.
inline constexpr std::array<double, 3> kHorizons = {1.0, 2.0, 3.0};
inline constexpr double kStationaryYawStep = 0.05;

struct EgoDims {
  double length = 4.08;
  double width = 1.85;
};

/// Displacement at each horizon's waypoint.
HorizonValues l2_error(const Trajectory& plan, const Trajectory& gt);

/// Heading per waypoint from the trajectory's own segments. Segments under
/// 5 cm keep the previous heading.
Eigen::VectorXd yaw_from_traj(const Trajectory& traj, double initial_yaw);

inline bool obb_overlap(const ObbPose& a, const ObbPose& b) { return obb_intersects(a, b); }

struct CollisionOutcome {
  std::array<bool, 3> by_horizon{};
  /// 1-based waypoint of the first overlap, 0 when none.
  int first_step = 0;
};

/// Box-overlap check of a plan against agents' ground-truth futures.
CollisionOutcome collision_obb(const Trajectory& plan, const EgoDims& ego, std::span<const Agent> agents);

/// Occupancy-grid check: agents rasterized into cells, ego footprint snapped
/// to the grid with its initial heading frozen.
CollisionOutcome collision_grid(const Trajectory& plan, const EgoDims& ego, std::span<const Agent> agents,
                                double cell = 0.5);

/// Percentage of outcomes with a collision by each horizon.
HorizonValues collision_rate(std::span<const CollisionOutcome> outcomes);

/// Per-horizon mean over a batch, reduced in input order.
HorizonValues mean_horizons(std::span<const HorizonValues> values);

inline double horizon_average(const HorizonValues& v) { return (v[0] + v[1] + v[2]) / 3.0; }

enum class CollisionProtocol { Obb, Grid };
std::string to_string(CollisionProtocol p);
CollisionProtocol protocol_from_string(std::string_view s);

struct MetricRow {
  std::string method;
  HorizonValues l2{};
  HorizonValues collision{};  // percent
};

struct RelativeImprovement {
  double value = 0.0;  // fraction; 0.66 means a 66% reduction
  bool defined = true;
};

struct ReportRow {
  MetricRow metrics;
  double l2_avg = 0.0;
  double collision_avg = 0.0;
};

struct ImprovementRow {
  std::string method;
  std::string baseline;
  RelativeImprovement l2;
  RelativeImprovement collision;
};

struct PlanningReport {
  std::string protocol;
  std::vector<ReportRow> rows;
  std::vector<ImprovementRow> improvements;
};

RelativeImprovement relative_improvement(double method_avg, double baseline_avg);

/// Averages every row; with a baseline name, adds one improvement row per
/// other method.
PlanningReport aggregate_report(std::span<const MetricRow> rows, const std::string& baseline = {},
                                const std::string& protocol = "obb");

std::string report_csv(const PlanningReport& report);
std::string report_text(const PlanningReport& report);

}  // namespace sparseplan
