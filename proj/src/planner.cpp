#include "sparseplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"

namespace sparseplan {

int ModalTrajectorySet::best_mode() const {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  return best;
}

Trajectory kinematic_rollout(const AnchorBox& box, double yaw_rate_offset, int steps, double dt, double speed_scale) {
  return ctrv_rollout(box.position(), box.yaw(), box.speed() * speed_scale, yaw_rate_offset, steps, dt);
}

double estimate_ego_speed(const ReferenceLine& line, double threshold, int steps, double dt) {
  if (!line.usable()) throw Error(ErrorCode::DegenerateLine, "reference line needs at least 2 points");
  Eigen::Matrix2Xd poly = line.polyline();
  if (poly(0, 0) > 0.0) {
    Eigen::Matrix2Xd with_origin(2, poly.cols() + 1);
    with_origin.col(0).setZero();
    with_origin.rightCols(poly.cols()) = poly;
    poly = std::move(with_origin);
  }
  const auto proj = project_to_polyline<double>(Vector2::Zero(), poly);
  double length = (poly.col(proj.segment + 1) - proj.closest).norm();
  for (Eigen::Index s = proj.segment + 1; s + 1 < poly.cols(); ++s) length += (poly.col(s + 1) - poly.col(s)).norm();
  const double ahead = std::max(0.0, length - geo_distance_for(threshold));
  return ahead / (steps * dt);
}

double mean_line_distance(const Trajectory& traj, const ReferenceLine& line) {
  if (traj.empty()) return 0.0;
  const Eigen::Matrix2Xd poly = line.polyline();
  double sum = 0.0;
  for (Eigen::Index t = 0; t < traj.size(); ++t) sum += project_to_polyline<double>(traj[t], poly).distance;
  return sum / static_cast<double>(traj.size());
}

namespace {

ModalTrajectorySet score_modes(std::vector<Trajectory> modes, const ReferenceLine& line, double temperature) {
  ModalTrajectorySet set;
  Eigen::VectorXd logits(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k)
    logits[static_cast<Eigen::Index>(k)] = line.usable() ? -mean_line_distance(modes[k], line) / temperature : 0.0;
  set.scores = softmax(logits);
  set.modes = std::move(modes);
  return set;
}

std::vector<Trajectory> mode_bank(const AnchorBox& box, const MotionConfig& cfg, double last_offset,
                                  double last_speed_scale) {
  std::vector<Trajectory> modes;
  for (double off : cfg.yaw_offsets) modes.push_back(kinematic_rollout(box, off));
  modes.push_back(kinematic_rollout(box, last_offset, kHorizonSteps, kWaypointDt, last_speed_scale));
  return modes;
}

}  // namespace

JointPrediction predict_motion_joint(std::span<const PerceivedAgent> selected, double ego_speed,
                                     const ReferenceLine& line, const MotionConfig& cfg) {
  JointPrediction out;
  for (const PerceivedAgent& a : selected) {
    out.agents.push_back({a.id, score_modes(mode_bank(a.box, cfg, 0.0, cfg.slow_scale), line, cfg.score_temperature)});
  }
  BoxPose pose;
  pose.velocity = {ego_speed, 0.0, 0.0};
  const AnchorBox ego = encode_anchor(pose);
  for (std::size_t c = 0; c < kCommands.size(); ++c) {
    double offset = 0.0;
    double scale = 1.0;
    switch (kCommands[c]) {
      case Command::TurnLeft: offset = cfg.command_bias; break;
      case Command::TurnRight: offset = -cfg.command_bias; break;
      case Command::KeepForward: scale = cfg.slow_scale; break;
    }
    out.ego[c] = score_modes(mode_bank(ego, cfg, offset, scale), line, cfg.score_temperature);
  }
  return out;
}

Trajectory select_proposal(const std::array<ModalTrajectorySet, 3>& ego_sets, Command command) {
  const auto& set = ego_sets[static_cast<std::size_t>(command)];
  if (set.modes.empty()) throw Error(ErrorCode::EmptyInput, "no ego modes for the command");
  return set.modes[static_cast<std::size_t>(set.best_mode())];
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kStationarySegment = 0.05;

struct SignedBoundary {
  double s = std::numeric_limits<double>::infinity();
  Vector2 ds_dp = Vector2::Zero();
};

/// Signed distance to the nearest boundary: positive on the same side as the
/// reference point, negative beyond it.
SignedBoundary signed_boundary_distance(const Vector2& p, const Vector2& ref, std::span<const MapPolyline> boundaries) {
  SignedBoundary out;
  const MapPolyline* nearest = nullptr;
  PolylineProjection<double> best;
  for (const MapPolyline& b : boundaries) {
    const auto proj = project_to_polyline<double>(p, b.points);
    if (proj.distance < best.distance) {
      best = proj;
      nearest = &b;
    }
  }
  if (!nearest) return out;
  const Vector2 a = nearest->points.col(best.segment);
  const Vector2 dir = nearest->points.col(best.segment + 1) - a;
  const double side_p = cross2<double>(dir, p - a);
  const auto ref_proj = project_to_polyline<double>(ref, nearest->points);
  const Vector2 ra = nearest->points.col(ref_proj.segment);
  const double side_r = cross2<double>(nearest->points.col(ref_proj.segment + 1) - ra, ref - ra);
  const bool same = side_p * side_r >= 0.0;
  out.s = same ? best.distance : -best.distance;
  if (best.distance > 0.0) {
    const Vector2 n = (p - best.closest) / best.distance;
    out.ds_dp = same ? n : Vector2(-n);
  } else {
    Vector2 normal(-dir.y(), dir.x());
    if (normal.norm() > 0.0) normal.normalize();
    out.ds_dp = side_r >= 0.0 ? normal : Vector2(-normal);
  }
  return out;
}

}  // namespace

PlanCost constraint_cost(const Trajectory& proposal, const Eigen::Matrix2Xd& offsets, const PlanContext& ctx,
                         Eigen::Matrix2Xd* gradient) {
  const Eigen::Index steps = proposal.size();
  if (offsets.cols() != 0 && offsets.cols() != steps) throw Error(ErrorCode::Shape, "offset count does not match trajectory");
  for (const Trajectory& a : ctx.agent_futures)
    if (a.size() != steps) throw Error(ErrorCode::Shape, "agent future length does not match trajectory");

  Eigen::Matrix2Xd pts = proposal.points;
  if (offsets.cols() != 0) pts += offsets;
  Eigen::Matrix2Xd g_col = Eigen::Matrix2Xd::Zero(2, steps);
  Eigen::Matrix2Xd g_bound = g_col, g_dir = g_col, g_reg = g_col, g_attr = g_col;
  PlanCost c;
  c.weights = ctx.weights;
  const Eigen::Matrix2Xd line = ctx.line.polyline();
  const bool has_line = line.cols() >= 2;

  for (Eigen::Index t = 0; t < steps; ++t) {
    const Vector2 p = pts.col(t);

    for (const Trajectory& a : ctx.agent_futures) {
      const Vector2 d = p - a[t];
      const double dist = d.norm();
      if (dist >= ctx.d_safe) continue;
      const double h = ctx.d_safe - dist;
      c.collision += h * h;
      const Vector2 u = dist > 0.0 ? Vector2(d / dist) : Vector2(0.0, 1.0);
      g_col.col(t) += -2.0 * h * u;
    }

    if (!has_line) continue;
    const auto on_line = project_to_polyline<double>(p, line);

    if (!ctx.boundaries.empty()) {
      const SignedBoundary sb = signed_boundary_distance(p, on_line.closest, ctx.boundaries);
      const double h = 0.5 * ctx.d_safe - sb.s;
      if (h > 0.0) {
        c.overstep += h * h;
        g_bound.col(t) += -2.0 * h * sb.ds_dp;
      }
    }

    const Vector2 prev = t == 0 ? Vector2::Zero() : Vector2(pts.col(t - 1));
    const Vector2 seg = p - prev;
    const double len2 = seg.squaredNorm();
    if (len2 >= kStationarySegment * kStationarySegment) {
      const Vector2 line_dir = line.col(on_line.segment + 1) - line.col(on_line.segment);
      const double diff = wrap_angle(std::atan2(seg.y(), seg.x()) - std::atan2(line_dir.y(), line_dir.x()));
      c.direction += diff * diff;
      const Vector2 dtheta = Vector2(-seg.y(), seg.x()) / len2;
      g_dir.col(t) += 2.0 * diff * dtheta;
      if (t > 0) g_dir.col(t - 1) -= 2.0 * diff * dtheta;
    }

    if (ctx.weights.attraction != 0.0) {
      c.attraction += on_line.distance * on_line.distance;
      g_attr.col(t) += 2.0 * (p - on_line.closest);
    }
  }
  if (offsets.cols() != 0) {
    c.regularizer = offsets.squaredNorm();
    g_reg = 2.0 * offsets;
  }
  const CostWeights& w = ctx.weights;
  c.total = w.collision * c.collision + w.boundary * c.overstep + w.direction * c.direction +
            w.regularizer * c.regularizer + w.attraction * c.attraction;
  if (gradient) {
    *gradient = w.collision * g_col + w.boundary * g_bound + w.direction * g_dir + w.regularizer * g_reg +
                w.attraction * g_attr;
  }
  return c;
}

void RefineConfig::validate() const {
  if (stages < 1) throw Error(ErrorCode::Domain, "stage count must be at least 1");
  if (steps < 0) throw Error(ErrorCode::Domain, "descent steps must be non-negative");
  if (!(step_size >= 0.0)) throw Error(ErrorCode::Domain, "step size must be non-negative");
  if (!(d_safe >= 0.0)) throw Error(ErrorCode::Domain, "safety margin must be non-negative");
}

OptimizeResult optimize_plan(const Trajectory& proposal, const PlanContext& ctx, const RefineConfig& cfg) {
  if (!ctx.line.usable()) throw Error(ErrorCode::DegenerateLine, "planning needs a usable reference line");
  OptimizeResult r;
  r.offsets = Eigen::Matrix2Xd::Zero(2, proposal.size());
  Eigen::Matrix2Xd grad;
  r.before = constraint_cost(proposal, r.offsets, ctx, &grad);
  PlanCost current = r.before;
  for (int step = 0; step < cfg.steps; ++step) {
    if (grad.squaredNorm() == 0.0) break;
    double alpha = cfg.step_size;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving, alpha *= 0.5) {
      const Eigen::Matrix2Xd trial = r.offsets - alpha * grad;
      Eigen::Matrix2Xd trial_grad;
      const PlanCost cost = constraint_cost(proposal, trial, ctx, &trial_grad);
      if (cost.total < current.total) {
        r.offsets = trial;
        current = cost;
        grad = std::move(trial_grad);
        accepted = true;
        ++r.accepted_steps;
        break;
      }
    }
    if (!accepted) break;
  }
  r.after = current;
  r.refined = Trajectory(proposal.points + r.offsets, proposal.dt);
  return r;
}

// ---------------------------------------------------------------------------

RefineResult iterate_refine(const Scenario& scenario, const PipelineConfig& cfg, const PipelineModels& models) {
  cfg.refine.validate();
  cfg.schedule.validate();
  cfg.grid.validate();

  const Perception perceived =
      perturb_perception(scenario, cfg.perception, derive_seed(derive_seed(cfg.seed, "perception"), scenario.seed));
  const BevGrid response = models.response ? netlet::predict_response(*models.response, scenario.ego_intent, cfg.grid)
                                           : response_target(cfg.grid, scenario.ego_gt_future);
  ReferenceLine line = extract_reference_line(response, cfg.tau_ref);
  if (!line.usable()) throw Error(ErrorCode::DegenerateLine, "response map yields no usable reference line");

  RefineResult result;
  result.command = scenario.ego_intent.command;
  result.ego_speed = estimate_ego_speed(line, cfg.tau_ref);

  std::vector<QueryEmbedding> agent_queries;
  for (const auto& a : perceived.agents) agent_queries.push_back(make_agent_query(a, models.interaction));
  std::vector<QueryEmbedding> map_queries;
  std::vector<MapPolyline> boundaries;
  for (const auto& m : perceived.maps) {
    map_queries.push_back(make_map_query(m, models.interaction));
    if (m.polyline.kind == MapKind::Boundary) boundaries.push_back(m.polyline);
  }
  const QueryEmbedding ego = make_ego_query(models.interaction);

  std::unordered_map<int, const PerceivedAgent*> perceived_by_id;
  for (const auto& a : perceived.agents) perceived_by_id.emplace(a.id, &a);
  std::unordered_map<int, const Agent*> truth_by_id;
  for (const auto& a : scenario.agents) truth_by_id.emplace(a.id, &a);

  for (int stage = 1; stage <= cfg.refine.stages; ++stage) {
    StageTrace trace;
    trace.stage = stage;
    if (stage > 1) {
      ReferenceLine next = line_from_trajectory(result.stages.back().optimized.refined, cfg.grid);
      if (next.usable()) line = std::move(next);
    }
    trace.line = line;
    const BevGrid m_d = distance_map(line, cfg.grid);
    trace.selection = coarse_to_fine_select(ego, agent_queries, map_queries, m_d, cfg.schedule, models.interaction);

    std::vector<PerceivedAgent> selected;
    for (const auto& q : trace.selection.agents.kept) selected.push_back(*perceived_by_id.at(q.id));
    trace.motion = predict_motion_joint(selected, result.ego_speed, line, cfg.motion);
    trace.proposal = stage == 1 ? select_proposal(trace.motion.ego, result.command)
                                : result.stages.back().optimized.refined;

    PlanContext ctx;
    ctx.line = line;
    ctx.boundaries = boundaries;
    ctx.weights = cfg.refine.weights;
    ctx.d_safe = cfg.refine.d_safe;
    for (std::size_t k = 0; k < selected.size(); ++k) {
      if (cfg.refine.agent_source == AgentFutureSource::GroundTruth) {
        ctx.agent_futures.push_back(truth_by_id.at(selected[k].id)->gt_future);
      } else {
        ctx.agent_futures.push_back(trace.motion.agents[k].modes.modes.front());
      }
    }
    trace.optimized = optimize_plan(trace.proposal, ctx, cfg.refine);
    result.stages.push_back(std::move(trace));
  }
  result.plan = result.stages.back().optimized.refined;
  return result;
}

}  // namespace sparseplan
