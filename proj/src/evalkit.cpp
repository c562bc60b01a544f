#include "sparseplan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <iomanip>
#include <sstream>

#include "sparseplan/error.hpp"

namespace sparseplan {

namespace {

Eigen::Index horizon_column(double horizon_s, double dt) {
  return static_cast<Eigen::Index>(std::llround(horizon_s / dt)) - 1;
}

void require_coverage(const Trajectory& t, const char* what) {
  const Eigen::Index need = horizon_column(kHorizons.back(), kWaypointDt) + 1;
  if (t.size() < need) throw Error(ErrorCode::Shape, std::string(what) + " does not cover the 3 s horizon");
}

}  // namespace

HorizonValues l2_error(const Trajectory& plan, const Trajectory& gt) {
  if (plan.size() != gt.size()) throw Error(ErrorCode::Shape, "plan and ground truth differ in length");
  require_coverage(plan, "plan");
  HorizonValues out{};
  for (std::size_t h = 0; h < kHorizons.size(); ++h) {
    const Eigen::Index c = horizon_column(kHorizons[h], kWaypointDt);
    out[h] = (plan[c] - gt[c]).norm();
  }
  return out;
}

Eigen::VectorXd yaw_from_traj(const Trajectory& traj, double initial_yaw) {
  const Eigen::Index n = traj.size();
  Eigen::VectorXd yaw(n);
  double prev = initial_yaw;
  for (Eigen::Index t = 0; t < n; ++t) {
    Vector2 d = Vector2::Zero();
    if (t == 0) {
      if (n > 1) d = traj[1] - traj[0];
    } else {
      d = traj[t] - traj[t - 1];
    }
    if (d.norm() >= kStationaryYawStep) prev = std::atan2(d.y(), d.x());
    yaw[t] = prev;
  }
  return yaw;
}

namespace {

struct AgentTrack {
  Eigen::VectorXd yaw;
  const Agent* agent;
};

std::vector<AgentTrack> agent_tracks(std::span<const Agent> agents, Eigen::Index steps) {
  std::vector<AgentTrack> tracks;
  for (const Agent& a : agents) {
    if (a.gt_future.size() < steps) throw Error(ErrorCode::Shape, fmt::format("agent {} future is missing waypoints", a.id));
    tracks.push_back({yaw_from_traj(a.gt_future, a.box.yaw()), &a});
  }
  return tracks;
}

ObbPose agent_obb(const AgentTrack& tr, Eigen::Index t) {
  return {tr.agent->gt_future[t], tr.yaw[t], 0.5 * tr.agent->box.length(), 0.5 * tr.agent->box.width()};
}

CollisionOutcome finish(int first_step) {
  CollisionOutcome out;
  out.first_step = first_step;
  for (std::size_t h = 0; h < kHorizons.size(); ++h) {
    const int last = static_cast<int>(horizon_column(kHorizons[h], kWaypointDt)) + 1;
    out.by_horizon[h] = first_step > 0 && first_step <= last;
  }
  return out;
}

}  // namespace

CollisionOutcome collision_obb(const Trajectory& plan, const EgoDims& ego, std::span<const Agent> agents) {
  require_coverage(plan, "plan");
  const Eigen::Index steps = horizon_column(kHorizons.back(), kWaypointDt) + 1;
  const auto tracks = agent_tracks(agents, steps);
  const Eigen::VectorXd ego_yaw = yaw_from_traj(plan, 0.0);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const ObbPose e{plan[t], ego_yaw[t], 0.5 * ego.length, 0.5 * ego.width};
    for (const auto& tr : tracks)
      if (obb_overlap(e, agent_obb(tr, t))) return finish(static_cast<int>(t) + 1);
  }
  return finish(0);
}

CollisionOutcome collision_grid(const Trajectory& plan, const EgoDims& ego, std::span<const Agent> agents,
                                double cell) {
  if (!(cell > 0.0)) throw Error(ErrorCode::Domain, "cell size must be positive");
  require_coverage(plan, "plan");
  const Eigen::Index steps = horizon_column(kHorizons.back(), kWaypointDt) + 1;
  const auto tracks = agent_tracks(agents, steps);
  const auto cell_of = [cell](double v) { return static_cast<long>(std::floor(v / cell)); };
  const auto center_of = [cell](long i) { return (static_cast<double>(i) + 0.5) * cell; };

  for (Eigen::Index t = 0; t < steps; ++t) {
    const Vector2 snapped(center_of(cell_of(plan[t].x())), center_of(cell_of(plan[t].y())));
    const ObbPose footprint{snapped, 0.0, 0.5 * ego.length, 0.5 * ego.width};
    const double reach = footprint.radius_along(Vector2::UnitX()) + cell;
    const double reach_y = footprint.radius_along(Vector2::UnitY()) + cell;
    for (long i = cell_of(snapped.x() - reach); i <= cell_of(snapped.x() + reach); ++i) {
      for (long j = cell_of(snapped.y() - reach_y); j <= cell_of(snapped.y() + reach_y); ++j) {
        const ObbPose square{{center_of(i), center_of(j)}, 0.0, 0.5 * cell, 0.5 * cell};
        if (obb_separation(footprint, square) >= 0.0) continue;  // cells only touching the edge are outside
        const Vector2 c = square.center;
        for (const auto& tr : tracks)
          if (agent_obb(tr, t).contains(c)) return finish(static_cast<int>(t) + 1);
      }
    }
  }
  return finish(0);
}

HorizonValues collision_rate(std::span<const CollisionOutcome> outcomes) {
  HorizonValues out{};
  if (outcomes.empty()) return out;
  for (std::size_t h = 0; h < out.size(); ++h) {
    std::size_t hits = 0;
    for (const auto& o : outcomes) hits += o.by_horizon[h] ? 1 : 0;
    out[h] = 100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size());
  }
  return out;
}

HorizonValues mean_horizons(std::span<const HorizonValues> values) {
  HorizonValues out{};
  if (values.empty()) return out;
  for (const auto& v : values)
    for (std::size_t h = 0; h < out.size(); ++h) out[h] += v[h];
  for (double& x : out) x /= static_cast<double>(values.size());
  return out;
}

std::string to_string(CollisionProtocol p) { return p == CollisionProtocol::Obb ? "obb" : "grid"; }

CollisionProtocol protocol_from_string(std::string_view s) {
  if (s == "obb") return CollisionProtocol::Obb;
  if (s == "grid") return CollisionProtocol::Grid;
  throw Error(ErrorCode::Parse, fmt::format("unknown collision protocol '{}'", s));
}

RelativeImprovement relative_improvement(double method_avg, double baseline_avg) {
  if (baseline_avg == 0.0) return {0.0, false};
  return {(baseline_avg - method_avg) / baseline_avg, true};
}

PlanningReport aggregate_report(std::span<const MetricRow> rows, const std::string& baseline,
                                const std::string& protocol) {
  PlanningReport report;
  report.protocol = protocol;
  const ReportRow* base = nullptr;
  for (const MetricRow& r : rows) {
    for (double v : r.l2)
      if (!(v >= 0.0)) throw Error(ErrorCode::Domain, fmt::format("negative L2 in row '{}'", r.method));
    for (double v : r.collision)
      if (!(v >= 0.0 && v <= 100.0))
        throw Error(ErrorCode::Domain, fmt::format("collision rate outside [0, 100] in row '{}'", r.method));
    report.rows.push_back({r, horizon_average(r.l2), horizon_average(r.collision)});
  }
  if (baseline.empty()) return report;
  for (const auto& r : report.rows)
    if (r.metrics.method == baseline) base = &r;
  if (!base) throw Error(ErrorCode::Domain, fmt::format("baseline '{}' not among the report rows", baseline));
  for (const auto& r : report.rows) {
    if (&r == base) continue;
    report.improvements.push_back({r.metrics.method, baseline, relative_improvement(r.l2_avg, base->l2_avg),
                                   relative_improvement(r.collision_avg, base->collision_avg)});
  }
  return report;
}

namespace {

std::string pct(const RelativeImprovement& r) { return r.defined ? fmt::format("{:.2f}%", 100.0 * r.value) : "n/a"; }

/// Improvement as a fraction for machine-readable output; empty when undefined.
std::string ratio(const RelativeImprovement& r) { return r.defined ? fmt::format("{:.6g}", r.value) : ""; }

}  // namespace

std::string report_csv(const PlanningReport& report) {
  std::ostringstream os;
  os << "protocol,method,l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg\n";
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    os << fmt::format("{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g}\n", report.protocol, m.method,
                      m.l2[0], m.l2[1], m.l2[2], r.l2_avg, m.collision[0], m.collision[1], m.collision[2],
                      r.collision_avg);
  }
  for (const auto& i : report.improvements) {
    os << fmt::format("{},{} vs {},,,,{},,,,{}\n", report.protocol, i.method, i.baseline, ratio(i.l2),
                      ratio(i.collision));
  }
  return os.str();
}

std::string report_text(const PlanningReport& report) {
  std::size_t name_w = 6;
  for (const auto& r : report.rows) name_w = std::max(name_w, r.metrics.method.size());
  for (const auto& i : report.improvements) name_w = std::max(name_w, i.method.size() + 4 + i.baseline.size());
  std::ostringstream os;
  os << fmt::format("protocol: {}\n", report.protocol);
  os << fmt::format("{:<{}} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} {:>6}\n", "Method", name_w, "L2 1s", "2s",
                    "3s", "Avg", "Col 1s", "2s", "3s", "Avg");
  os << std::string(name_w, '-') << "-+-" << std::string(27, '-') << "-+-" << std::string(27, '-') << "\n";
  for (const auto& r : report.rows) {
    const auto& m = r.metrics;
    os << fmt::format("{:<{}} | {:>6.2f} {:>6.2f} {:>6.2f} {:>6.2f} | {:>6.2f} {:>6.2f} {:>6.2f} {:>6.2f}\n", m.method,
                      name_w, m.l2[0], m.l2[1], m.l2[2], r.l2_avg, m.collision[0], m.collision[1], m.collision[2],
                      r.collision_avg);
  }
  for (const auto& i : report.improvements) {
    os << fmt::format("{:<{}} | {:>27} | {:>27}\n", i.method + " vs " + i.baseline, name_w,
                      "L2 reduction " + pct(i.l2), "collision reduction " + pct(i.collision));
  }
  return os.str();
}

}  // namespace sparseplan
