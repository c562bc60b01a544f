#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <span>
#include <vector>

#include "sparseplan/bevgrid.hpp"
#include "sparseplan/interaction.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan {

inline constexpr int kModes = 6;

struct ModalTrajectorySet {
  std::vector<Trajectory> modes;
  Eigen::VectorXd scores;

  /// Highest-scoring mode, lowest index on ties.
  int best_mode() const;
};

/// Constant-speed, constant-turn-rate rollout from a box's pose and speed.
/// `speed_scale` scales the box speed (1 keeps it).
Trajectory kinematic_rollout(const AnchorBox& box, double yaw_rate_offset, int steps = kHorizonSteps,
                             double dt = kWaypointDt, double speed_scale = 1.0);

struct MotionConfig {
  /// Yaw-rate offsets of modes 0..4 (rad/s).
  std::array<double, 5> yaw_offsets = {0.0, 0.15, -0.15, 0.3, -0.3};
  /// Yaw-rate offset of the command mode for turn commands (rad/s).
  double command_bias = 0.45;
  /// Speed scale of the command mode for keep-forward and for agents.
  double slow_scale = 0.5;
  /// Softmax temperature (m) over mean distance to the reference line.
  double score_temperature = 1.0;
};

struct AgentPrediction {
  int id = 0;
  ModalTrajectorySet modes;
};

struct JointPrediction {
  std::vector<AgentPrediction> agents;
  /// One set per command, indexed like kCommands (left, right, forward).
  std::array<ModalTrajectorySet, 3> ego;
};

/// Ego speed read off the reference line: arc length ahead of the origin,
/// less the lead margin the threshold adds, over the horizon.
double estimate_ego_speed(const ReferenceLine& line, double threshold, int steps = kHorizonSteps,
                          double dt = kWaypointDt);

/// Mean distance from the trajectory's waypoints to the reference line.
double mean_line_distance(const Trajectory& traj, const ReferenceLine& line);

/// Kinematic mode banks for the selected agents and the three ego-intent
/// copies, scored by closeness to the reference line.
JointPrediction predict_motion_joint(std::span<const PerceivedAgent> selected, double ego_speed,
                                     const ReferenceLine& line, const MotionConfig& cfg = {});

Trajectory select_proposal(const std::array<ModalTrajectorySet, 3>& ego_sets, Command command);

struct CostWeights {
  double collision = 1.0;
  double boundary = 0.5;
  double direction = 0.1;
  double regularizer = 0.05;
  double attraction = 0.0;
};

struct PlanCost {
  double collision = 0.0;
  double overstep = 0.0;
  double direction = 0.0;
  double regularizer = 0.0;
  double attraction = 0.0;
  CostWeights weights;
  double total = 0.0;
};

struct PlanContext {
  ReferenceLine line;
  std::vector<Trajectory> agent_futures;
  std::vector<MapPolyline> boundaries;
  CostWeights weights;
  double d_safe = 1.0;
};

/// Cost of `proposal + offsets` (offsets 2 x T, may be empty for zero).
/// When `gradient` is given it receives d(total)/d(offsets).
PlanCost constraint_cost(const Trajectory& proposal, const Eigen::Matrix2Xd& offsets, const PlanContext& ctx,
                         Eigen::Matrix2Xd* gradient = nullptr);

inline PlanCost constraint_cost(const Trajectory& traj, const PlanContext& ctx) {
  return constraint_cost(traj, Eigen::Matrix2Xd(), ctx);
}

enum class AgentFutureSource { Predicted, GroundTruth };

struct RefineConfig {
  int stages = 2;
  int steps = 50;
  double step_size = 0.5;
  double d_safe = 1.0;
  CostWeights weights;
  AgentFutureSource agent_source = AgentFutureSource::Predicted;

  void validate() const;
};

struct OptimizeResult {
  Trajectory refined;
  Eigen::Matrix2Xd offsets;
  PlanCost before;
  PlanCost after;
  int accepted_steps = 0;
};

/// Gradient descent on the per-waypoint offsets with backtracking: a step is
/// taken only when it lowers the total cost (at most 20 halvings).
OptimizeResult optimize_plan(const Trajectory& proposal, const PlanContext& ctx, const RefineConfig& cfg);

struct PipelineConfig {
  GridSpec grid;
  double tau_ref = 0.9;
  SelectionSchedule schedule;
  RefineConfig refine;
  MotionConfig motion;
  PerceptionNoise perception;
  std::uint64_t seed = 0;
};

struct PipelineModels {
  InteractionParams interaction;
  /// Learned response map; the ground-truth response target is used when null.
  const netlet::ResponseRegressor* response = nullptr;
};

struct StageTrace {
  int stage = 1;
  ReferenceLine line;
  SelectionResult selection;
  JointPrediction motion;
  Trajectory proposal;
  OptimizeResult optimized;
};

struct RefineResult {
  Trajectory plan;
  Command command = Command::KeepForward;
  double ego_speed = 0.0;
  std::vector<StageTrace> stages;
};

/// Full per-scenario pipeline: perception stand-in, response map, reference
/// line, distance map, selection, joint motion, and N-stage refinement.
RefineResult iterate_refine(const Scenario& scenario, const PipelineConfig& cfg, const PipelineModels& models);

}  // namespace sparseplan
