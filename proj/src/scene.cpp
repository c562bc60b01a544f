#include "sparseplan/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"

namespace sparseplan {

AnchorBox::Vector AnchorBox::to_vector() const {
  Vector v;
  v << x, y, z, log_w, log_h, log_l, sin_yaw, cos_yaw, vx, vy, vz;
  return v;
}

AnchorBox AnchorBox::from_vector(const Vector& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
}

double AnchorBox::yaw() const { return std::atan2(sin_yaw, cos_yaw); }
double AnchorBox::speed() const { return std::hypot(vx, vy); }
double AnchorBox::length() const { return std::exp(log_l); }
double AnchorBox::width() const { return std::exp(log_w); }

AnchorBox encode_anchor(const BoxPose& pose) {
  if (!(pose.width > 0.0) || !(pose.height > 0.0) || !(pose.length > 0.0)) {
    throw Error(ErrorCode::InvalidDimension, "box dimensions must be positive");
  }
  AnchorBox a;
  a.x = pose.position.x();
  a.y = pose.position.y();
  a.z = pose.position.z();
  a.log_w = std::log(pose.width);
  a.log_h = std::log(pose.height);
  a.log_l = std::log(pose.length);
  a.sin_yaw = std::sin(pose.yaw);
  a.cos_yaw = std::cos(pose.yaw);
  a.vx = pose.velocity.x();
  a.vy = pose.velocity.y();
  a.vz = pose.velocity.z();
  return a;
}

BoxPose decode_anchor(const AnchorBox& a) {
  BoxPose p;
  p.position = {a.x, a.y, a.z};
  p.width = std::exp(a.log_w);
  p.height = std::exp(a.log_h);
  p.length = std::exp(a.log_l);
  p.yaw = std::atan2(a.sin_yaw, a.cos_yaw);
  p.velocity = {a.vx, a.vy, a.vz};
  return p;
}

bool is_valid(const AnchorBox& a) {
  if (!a.to_vector().allFinite()) return false;
  if (std::abs(a.sin_yaw * a.sin_yaw + a.cos_yaw * a.cos_yaw - 1.0) > 1e-6) return false;
  for (double ld : {a.log_w, a.log_h, a.log_l}) {
    const double d = std::exp(ld);
    if (!(d > 0.0) || !(d < 50.0)) return false;
  }
  return true;
}

MapPolyline straight_polyline(int id, MapKind kind, const Vector2& from, const Vector2& to) {
  MapPolyline m;
  m.id = id;
  m.kind = kind;
  for (int i = 0; i < kMapPoints; ++i) {
    const double t = static_cast<double>(i) / (kMapPoints - 1);
    m.points.col(i) = from + t * (to - from);
  }
  return m;
}

Trajectory ctrv_rollout(const Vector2& start, double yaw, double speed, double yaw_rate, int steps,
                        double dt, double acceleration) {
  Eigen::Matrix2Xd pts(2, std::max(steps, 0));
  // Sub-stepped integration keeps arcs accurate for any yaw rate.
  constexpr int kSub = 20;
  const double h = dt / kSub;
  Vector2 p = start;
  double theta = yaw;
  double v = speed;
  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < kSub; ++k) {
      const double v_next = std::max(0.0, v + acceleration * h);
      const double v_mid = 0.5 * (v + v_next);
      const double theta_mid = theta + 0.5 * yaw_rate * h;
      p += v_mid * h * Vector2(std::cos(theta_mid), std::sin(theta_mid));
      theta += yaw_rate * h;
      v = v_next;
    }
    pts.col(t) = p;
  }
  return Trajectory(std::move(pts), dt);
}

std::string scenario_name(std::string_view template_id, std::uint64_t seed) {
  return std::string(template_id) + "_" + std::to_string(seed);
}

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kRoadHalfWidth = 1.5 * kLaneWidth;
constexpr double kEgoLength = 4.08;
constexpr double kEgoWidth = 1.85;
constexpr double kPlacementMargin = 0.5;

struct ClassDims {
  double w, h, l;
};

ClassDims class_dims(AgentClass c) {
  switch (c) {
    case AgentClass::Car: return {1.9, 1.6, 4.5};
    case AgentClass::Truck: return {2.5, 3.0, 8.0};
    case AgentClass::Bus: return {2.9, 3.3, 11.0};
    case AgentClass::Cyclist: return {0.7, 1.7, 1.8};
    case AgentClass::Pedestrian: return {0.6, 1.75, 0.6};
    case AgentClass::Barrier: return {0.5, 1.0, 2.0};
  }
  return {1.0, 1.0, 1.0};
}

class ScenarioBuilder {
 public:
  ScenarioBuilder(std::string_view template_id, std::uint64_t seed)
      : rng_(derive_seed(seed, "scenario")) {
    s_.template_id = std::string(template_id);
    s_.name = scenario_name(template_id, seed);
    s_.seed = seed;
  }

  Rng& rng() { return rng_; }

  void set_ego(double speed, double acceleration, double yaw_rate, Command command) {
    s_.ego_intent = {speed, acceleration, yaw_rate, command};
    BoxPose pose;
    pose.width = kEgoWidth;
    pose.height = 1.56;
    pose.length = kEgoLength;
    pose.velocity = {speed, 0.0, 0.0};
    s_.ego_box = encode_anchor(pose);
    ego_yaw_rate_ = yaw_rate;
    s_.ego_gt_future = ctrv_rollout(Vector2::Zero(), 0.0, speed, yaw_rate, kHorizonSteps,
                                    kWaypointDt, acceleration);
  }

  const Trajectory& ego_future() const { return s_.ego_gt_future; }

  void add_map(MapKind kind, const Vector2& from, const Vector2& to) {
    if (s_.maps.size() >= kMaxMaps) return;
    s_.maps.push_back(straight_polyline(next_map_id_++, kind, from, to));
  }

  void straight_road() {
    add_map(MapKind::Boundary, {-30, kRoadHalfWidth}, {30, kRoadHalfWidth});
    add_map(MapKind::Boundary, {-30, -kRoadHalfWidth}, {30, -kRoadHalfWidth});
    add_map(MapKind::Divider, {-30, 0.5 * kLaneWidth}, {30, 0.5 * kLaneWidth});
    add_map(MapKind::Divider, {-30, -0.5 * kLaneWidth}, {30, -0.5 * kLaneWidth});
  }

  /// Four-way intersection whose lateral road spans x in [x0, x0 + 2 * half-width].
  void intersection(double x0) {
    const double x1 = x0 + 2.0 * kRoadHalfWidth;
    const double h = kRoadHalfWidth;
    for (double side : {1.0, -1.0}) {
      add_map(MapKind::Boundary, {-30, side * h}, {x0, side * h});
      add_map(MapKind::Boundary, {x1, side * h}, {30, side * h});
      add_map(MapKind::Boundary, {x0, side * h}, {x0, side * 15.0});
      add_map(MapKind::Boundary, {x1, side * h}, {x1, side * 15.0});
      add_map(MapKind::Divider, {-30, side * 0.5 * kLaneWidth}, {x0, side * 0.5 * kLaneWidth});
      add_map(MapKind::PedestrianCrossing, {x0 + 0.5, side * (h + 2.0)},
              {x1 - 0.5, side * (h + 2.0)});
    }
    add_map(MapKind::PedestrianCrossing, {x0 - 2.0, -h}, {x0 - 2.0, h});
  }

  /// Tries to add an agent; rejected when its box comes within a margin of the
  /// ego box at the current time or at any waypoint of the ground-truth futures.
  bool try_add_agent(AgentClass label, const Vector2& pos, double yaw, double speed,
                     double yaw_rate) {
    if (s_.agents.size() >= kMaxAgents) return false;
    ClassDims d = class_dims(label);
    const double jitter = rng_.uniform(0.9, 1.1);
    d.w *= jitter;
    d.l *= jitter;
    const Trajectory future = ctrv_rollout(pos, yaw, speed, yaw_rate);
    auto clear = [&](const Vector2& ego_c, double ego_yaw, const Vector2& c, double a_yaw) {
      const BasicObb<double> e{ego_c, ego_yaw, 0.5 * kEgoLength, 0.5 * kEgoWidth};
      const BasicObb<double> o{c, a_yaw, 0.5 * d.l, 0.5 * d.w};
      return obb_distance(e, o) >= kPlacementMargin;
    };
    if (!clear(Vector2::Zero(), 0.0, pos, yaw)) return false;
    for (Eigen::Index t = 0; t < future.size(); ++t) {
      const double tau = static_cast<double>(t + 1) * kWaypointDt;
      if (!clear(s_.ego_gt_future[t], ego_yaw_rate_ * tau, future[t], yaw + yaw_rate * tau)) return false;
    }
    BoxPose pose;
    pose.position = {pos.x(), pos.y(), 0.0};
    pose.width = d.w;
    pose.height = d.h;
    pose.length = d.l;
    pose.yaw = yaw;
    pose.velocity = {speed * std::cos(yaw), speed * std::sin(yaw), 0.0};
    Agent a;
    a.id = next_agent_id_++;
    a.box = encode_anchor(pose);
    a.label = label;
    a.gt_future = future;
    s_.agents.push_back(std::move(a));
    return true;
  }

  void clutter(const TemplateParams& params) {
    const int n = rng_.uniform_int(params.clutter_min, std::max(params.clutter_min, params.clutter_max));
    for (int i = 0; i < n; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double u = rng_.uniform();
        const AgentClass label =
            u < 0.3 ? AgentClass::Pedestrian : (u < 0.8 ? AgentClass::Car : AgentClass::Barrier);
        const Vector2 pos(rng_.uniform(-38.0, 38.0), rng_.sign() * rng_.uniform(7.5, 24.0));
        const double yaw = rng_.uniform(-std::numbers::pi, std::numbers::pi);
        double speed = 0.0;
        if (label == AgentClass::Pedestrian) speed = rng_.uniform(0.0, 1.5);
        if (label == AgentClass::Car && rng_.bernoulli(0.5)) speed = rng_.uniform(0.0, 3.0);
        if (try_add_agent(label, pos, yaw, speed, 0.0)) break;
      }
    }
  }

  void adjacent_traffic(int count, double ego_speed) {
    for (int i = 0; i < count; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const Vector2 pos(rng_.uniform(-25.0, 25.0), rng_.sign() * kLaneWidth);
        const double speed = std::max(0.0, rng_.uniform(ego_speed - 2.0, ego_speed + 2.0));
        const AgentClass label = rng_.bernoulli(0.8) ? AgentClass::Car : AgentClass::Truck;
        if (try_add_agent(label, pos, 0.0, speed, 0.0)) break;
      }
    }
  }

  Scenario finish() { return std::move(s_); }

 private:
  Scenario s_;
  Rng rng_;
  double ego_yaw_rate_ = 0.0;
  int next_agent_id_ = 1;
  int next_map_id_ = 1;
};

double min_waypoint_distance(const Trajectory& a, const Trajectory& b) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) best = std::min(best, (a[i] - b[j]).norm());
  return best;
}

/// x coordinate at which the ego future first reaches |y| >= level (or its end).
double crossing_x(const Trajectory& ego, double level) {
  Vector2 prev = Vector2::Zero();
  for (Eigen::Index t = 0; t < ego.size(); ++t) {
    const Vector2 p = ego[t];
    if (std::abs(p.y()) >= level) {
      const double f = (level - std::abs(prev.y())) / (std::abs(p.y()) - std::abs(prev.y()));
      return prev.x() + f * (p.x() - prev.x());
    }
    prev = p;
  }
  return prev.x();
}

void build_turn(ScenarioBuilder& b, const TemplateParams& params, bool left) {
  auto& rng = b.rng();
  const double speed = rng.uniform(std::max(params.ego_speed_min, 3.5), std::min(params.ego_speed_max, 6.0));
  const double rate = left ? rng.uniform(0.25, 0.4) : -rng.uniform(0.3, 0.5);
  b.set_ego(speed, 0.0, rate, left ? Command::TurnLeft : Command::TurnRight);
  const double x_cross = crossing_x(b.ego_future(), kRoadHalfWidth);
  const double x0 = x_cross - kRoadHalfWidth;
  b.intersection(x0);
  const double side = left ? 1.0 : -1.0;

  if (left) {
    // Oncoming vehicle that crosses the turning path at a different time.
    for (int attempt = 0; attempt < 400; ++attempt) {
      const Vector2 pos(rng.uniform(x0 + 4.0, 30.0), kLaneWidth + rng.uniform(-0.5, 0.5));
      const double v = rng.uniform(3.0, 9.0);
      const Trajectory fut = ctrv_rollout(pos, std::numbers::pi, v, 0.0);
      if (min_waypoint_distance(fut, b.ego_future()) >= 3.0) continue;
      if (b.try_add_agent(AgentClass::Car, pos, std::numbers::pi, v, 0.0)) break;
    }
  } else {
    // Vehicle waiting on the lateral road.
    for (int attempt = 0; attempt < 50; ++attempt) {
      const Vector2 pos(x0 + kRoadHalfWidth + 0.5 * kLaneWidth, side * rng.uniform(9.0, 14.0));
      if (b.try_add_agent(AgentClass::Car, pos, -side * std::numbers::pi / 2, 0.0, 0.0)) break;
    }
  }
  // Pedestrians on the crosswalk of the target road.
  const int peds = rng.uniform_int(1, 3);
  for (int i = 0; i < peds; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const Vector2 pos(rng.uniform(x0 - 3.0, x0 + 2.0 * kRoadHalfWidth + 3.0),
                        side * (kRoadHalfWidth + 2.0));
      const double yaw = rng.bernoulli(0.5) ? 0.0 : std::numbers::pi;
      if (b.try_add_agent(AgentClass::Pedestrian, pos, yaw, rng.uniform(0.8, 1.5), 0.0)) break;
    }
  }
  b.clutter(params);
}

}  // namespace

Scenario gen_scenario(std::string_view template_id, std::uint64_t seed, const TemplateParams& params) {
  if (std::find(kTemplateIds.begin(), kTemplateIds.end(), template_id) == kTemplateIds.end()) {
    throw Error(ErrorCode::UnknownTemplate, std::string(template_id));
  }
  ScenarioBuilder b(template_id, seed);
  auto& rng = b.rng();
  const double speed = rng.uniform(params.ego_speed_min, params.ego_speed_max);

  if (template_id == "empty") {
    b.set_ego(speed, 0.0, 0.0, Command::KeepForward);
    b.straight_road();
  } else if (template_id == "straight_traffic") {
    b.set_ego(speed, 0.0, 0.0, Command::KeepForward);
    b.straight_road();
    for (int attempt = 0; attempt < 20; ++attempt) {
      const Vector2 lead(rng.uniform(speed * 3.0 + 8.0, 30.0), 0.0);
      if (b.try_add_agent(AgentClass::Car, lead, 0.0, speed + rng.uniform(0.0, 1.0), 0.0)) break;
    }
    b.adjacent_traffic(rng.uniform_int(2, 4), speed);
    b.clutter(params);
  } else if (template_id == "cut_in") {
    b.set_ego(speed, 0.0, 0.0, Command::KeepForward);
    b.straight_road();
    const double side = rng.sign();
    for (int attempt = 0; attempt < 50; ++attempt) {
      const Vector2 pos(rng.uniform(6.0, 14.0), side * kLaneWidth);
      const double v = speed + rng.uniform(1.0, 3.0);
      if (b.try_add_agent(AgentClass::Car, pos, -side * 0.2, v, side * 0.12)) break;
    }
    b.adjacent_traffic(rng.uniform_int(1, 3), speed);
    b.clutter(params);
  } else if (template_id == "intersection_left") {
    build_turn(b, params, true);
  } else if (template_id == "intersection_right") {
    build_turn(b, params, false);
  } else {  // ped_crossing
    const double x_cross = rng.uniform(12.0, 20.0);
    const double stop = x_cross - 4.0;
    const double decel = -speed * speed / (2.0 * stop);
    b.set_ego(speed, decel, 0.0, Command::KeepForward);
    b.straight_road();
    b.add_map(MapKind::PedestrianCrossing, {x_cross, -kRoadHalfWidth}, {x_cross, kRoadHalfWidth});
    const int peds = rng.uniform_int(1, 4);
    for (int i = 0; i < peds; ++i) {
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double dir = rng.sign();
        const Vector2 pos(x_cross + rng.uniform(-1.5, 1.5), rng.uniform(-6.0, 6.0));
        if (b.try_add_agent(AgentClass::Pedestrian, pos, dir * std::numbers::pi / 2,
                            rng.uniform(1.0, 1.6), 0.0))
          break;
      }
    }
    b.clutter(params);
  }
  return b.finish();
}

// ---------------------------------------------------------------------------

double perception_confidence(double d_xy, double d_logdim, double d_yaw, double d_v) {
  const double magnitude = d_xy / 2.0 + d_logdim / 0.5 + d_yaw / 0.5 + d_v / 4.0;
  return std::clamp(1.0 - magnitude, 0.05, 1.0);
}

Perception perturb_perception(const Scenario& s, const PerceptionNoise& noise, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "perception"));
  Perception out;
  out.agents.reserve(s.agents.size());
  for (const Agent& a : s.agents) {
    const bool drop = rng.bernoulli(noise.drop_rate);
    const double dx = rng.normal(0.0, noise.sigma_xy);
    const double dy = rng.normal(0.0, noise.sigma_xy);
    const Eigen::Vector3d dlog(rng.normal(0.0, noise.sigma_logdim), rng.normal(0.0, noise.sigma_logdim),
                               rng.normal(0.0, noise.sigma_logdim));
    const double dyaw = rng.normal(0.0, noise.sigma_yaw);
    const double dvx = rng.normal(0.0, noise.sigma_v);
    const double dvy = rng.normal(0.0, noise.sigma_v);
    if (drop) continue;

    PerceivedAgent p;
    p.id = a.id;
    p.label = a.label;
    p.box = a.box;
    p.box.x += dx;
    p.box.y += dy;
    p.box.log_w += dlog[0];
    p.box.log_h += dlog[1];
    p.box.log_l += dlog[2];
    if (dyaw != 0.0) {
      const double yaw = a.box.yaw() + dyaw;
      p.box.sin_yaw = std::sin(yaw);
      p.box.cos_yaw = std::cos(yaw);
    }
    p.box.vx += dvx;
    p.box.vy += dvy;
    p.confidence = perception_confidence(std::hypot(dx, dy), dlog.norm(), std::abs(dyaw), std::hypot(dvx, dvy));
    out.agents.push_back(p);
  }
  for (const MapPolyline& m : s.maps) {
    const bool drop = rng.bernoulli(noise.drop_rate);
    Eigen::Matrix<double, 2, kMapPoints> delta;
    for (int i = 0; i < kMapPoints; ++i) {
      delta(0, i) = rng.normal(0.0, noise.sigma_xy);
      delta(1, i) = rng.normal(0.0, noise.sigma_xy);
    }
    if (drop) continue;
    PerceivedMap p;
    p.polyline = m;
    p.polyline.points += delta;
    p.confidence = perception_confidence(delta.colwise().norm().mean(), 0.0, 0.0, 0.0);
    out.maps.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Command c) {
  switch (c) {
    case Command::TurnLeft: return "turn_left";
    case Command::TurnRight: return "turn_right";
    case Command::KeepForward: return "keep_forward";
  }
  return "keep_forward";
}

std::string_view to_string(MapKind k) {
  switch (k) {
    case MapKind::Divider: return "divider";
    case MapKind::PedestrianCrossing: return "ped_crossing";
    case MapKind::Boundary: return "boundary";
  }
  return "divider";
}

std::string_view to_string(AgentClass c) {
  switch (c) {
    case AgentClass::Car: return "car";
    case AgentClass::Truck: return "truck";
    case AgentClass::Bus: return "bus";
    case AgentClass::Cyclist: return "cyclist";
    case AgentClass::Pedestrian: return "pedestrian";
    case AgentClass::Barrier: return "barrier";
  }
  return "car";
}

std::optional<Command> command_from_string(std::string_view s) {
  for (Command c : kCommands)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<MapKind> map_kind_from_string(std::string_view s) {
  for (MapKind k : {MapKind::Divider, MapKind::PedestrianCrossing, MapKind::Boundary})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<AgentClass> agent_class_from_string(std::string_view s) {
  for (AgentClass c : {AgentClass::Car, AgentClass::Truck, AgentClass::Bus, AgentClass::Cyclist,
                       AgentClass::Pedestrian, AgentClass::Barrier})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

}  // namespace sparseplan
