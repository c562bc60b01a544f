#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparseplan/geometry.hpp"

namespace sparseplan {

// Frame: current ego frame, x forward, y left, yaw counter-clockwise from +x.

inline constexpr double kWaypointDt = 0.5;
inline constexpr int kHorizonSteps = 6;
inline constexpr int kMapPoints = 20;
inline constexpr std::size_t kMaxAgents = 900;
inline constexpr std::size_t kMaxMaps = 100;
inline constexpr double kMaxAgentSpeed = 30.0;

/// Metric pose of a box; the decoded form of an AnchorBox.
struct BoxPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double width = 1.0;
  double height = 1.0;
  double length = 1.0;
  double yaw = 0.0;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

/// 11-dim agent parameterization: position, log-dimensions, yaw sine/cosine,
/// velocity.
struct AnchorBox {
  double x = 0, y = 0, z = 0;
  double log_w = 0, log_h = 0, log_l = 0;
  double sin_yaw = 0, cos_yaw = 1;
  double vx = 0, vy = 0, vz = 0;

  using Vector = Eigen::Matrix<double, 11, 1>;

  Vector to_vector() const;
  static AnchorBox from_vector(const Vector& v);

  Vector2 position() const { return {x, y}; }
  double yaw() const;
  double speed() const;
  double length() const;
  double width() const;
};

AnchorBox encode_anchor(const BoxPose& pose);
BoxPose decode_anchor(const AnchorBox& a);

/// Checks the AnchorBox invariants (unit yaw encoding, dimensions in (0, 50) m).
bool is_valid(const AnchorBox& a);

enum class MapKind { Divider, PedestrianCrossing, Boundary };

struct MapPolyline {
  int id = 0;
  MapKind kind = MapKind::Divider;
  Eigen::Matrix<double, 2, kMapPoints> points = Eigen::Matrix<double, 2, kMapPoints>::Zero();
};

/// Evenly spaced 20-point polyline between two endpoints.
MapPolyline straight_polyline(int id, MapKind kind, const Vector2& from, const Vector2& to);

enum class Command { TurnLeft, TurnRight, KeepForward };

inline constexpr std::array<Command, 3> kCommands = {Command::TurnLeft, Command::TurnRight,
                                                     Command::KeepForward};

struct EgoIntent {
  double velocity = 0.0;
  double acceleration = 0.0;
  double yaw_rate = 0.0;
  Command command = Command::KeepForward;
};

/// Future waypoints at fixed spacing; column t holds the pose at (t + 1) * dt.
struct Trajectory {
  Eigen::Matrix2Xd points;
  double dt = kWaypointDt;

  Trajectory() = default;
  explicit Trajectory(Eigen::Matrix2Xd p, double step = kWaypointDt) : points(std::move(p)), dt(step) {}

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  Vector2 operator[](Eigen::Index t) const { return points.col(t); }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.dt == b.dt && a.points.cols() == b.points.cols() && a.points == b.points;
  }
};

enum class AgentClass { Car, Truck, Bus, Cyclist, Pedestrian, Barrier };

struct Agent {
  int id = 0;
  AnchorBox box;
  AgentClass label = AgentClass::Car;
  Trajectory gt_future;
};

struct Scenario {
  std::string name;
  std::string template_id;
  std::uint64_t seed = 0;
  AnchorBox ego_box;
  EgoIntent ego_intent;
  Trajectory ego_gt_future;
  std::vector<Agent> agents;
  std::vector<MapPolyline> maps;
};

/// Constant-speed, constant-turn-rate integration from an initial pose.
/// Speed follows speed + acceleration * t clamped at zero.
Trajectory ctrv_rollout(const Vector2& start, double yaw, double speed, double yaw_rate,
                        int steps = kHorizonSteps, double dt = kWaypointDt,
                        double acceleration = 0.0);

inline constexpr std::array<std::string_view, 6> kTemplateIds = {
    "empty", "straight_traffic", "cut_in", "intersection_left", "intersection_right", "ped_crossing"};

/// Ranges the templates draw from.
struct TemplateParams {
  double ego_speed_min = 3.0;
  double ego_speed_max = 8.0;
  int clutter_min = 10;
  int clutter_max = 40;
};

Scenario gen_scenario(std::string_view template_id, std::uint64_t seed,
                      const TemplateParams& params = {});

std::string scenario_name(std::string_view template_id, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Perception stand-in

struct PerceptionNoise {
  double sigma_xy = 0.0;
  double sigma_logdim = 0.0;
  double sigma_yaw = 0.0;
  double sigma_v = 0.0;
  double drop_rate = 0.0;
};

struct PerceivedAgent {
  int id = 0;
  AnchorBox box;
  AgentClass label = AgentClass::Car;
  double confidence = 1.0;
};

struct PerceivedMap {
  MapPolyline polyline;
  double confidence = 1.0;
};

struct Perception {
  std::vector<PerceivedAgent> agents;
  std::vector<PerceivedMap> maps;
};

/// Confidence proxy from a perturbation: clamp(1 - magnitude, 0.05, 1) where the
/// magnitude sums per-channel perturbation norms divided by fixed scales.
double perception_confidence(double d_xy, double d_logdim, double d_yaw, double d_v);

Perception perturb_perception(const Scenario& s, const PerceptionNoise& noise, std::uint64_t seed);

std::string_view to_string(Command c);
std::string_view to_string(MapKind k);
std::string_view to_string(AgentClass c);
std::optional<Command> command_from_string(std::string_view s);
std::optional<MapKind> map_kind_from_string(std::string_view s);
std::optional<AgentClass> agent_class_from_string(std::string_view s);

}  // namespace sparseplan
