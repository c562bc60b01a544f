#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparseplan/planner.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan {

inline constexpr int kBoxDims = 11;
inline constexpr double kTrajectoryNoiseFraction = 0.2;

struct NoiseSpec {
  double s = 2.0;
  int groups = 3;
  /// Per-dimension multipliers in AnchorBox vector order.
  std::array<double, kBoxDims> multipliers = {1.0, 1.0, 0.25, 0.05, 0.05, 0.05, 0.1, 0.1, 0.25, 0.25, 0.25};

  double scale(int dim) const { return s * multipliers[static_cast<std::size_t>(dim)]; }
  void validate() const;
};

struct DenoiseGroup {
  /// positives[g][k] is box k of group g.
  std::vector<std::vector<AnchorBox>> positives;
  std::vector<std::vector<AnchorBox>> negatives;
  /// Raw offsets per group, K x 11, before any sin/cos renormalization.
  std::vector<Eigen::MatrixXd> positive_offsets;
  std::vector<Eigen::MatrixXd> negative_offsets;
};

/// Group g draws from derive_seed(derive_seed(seed, "noise"), g).
DenoiseGroup diffuse_positions(std::span<const AnchorBox> gt_boxes, const NoiseSpec& spec, std::uint64_t seed);

/// Same, with one explicit seed per group (the group count is seeds.size()).
DenoiseGroup diffuse_positions(std::span<const AnchorBox> gt_boxes, const NoiseSpec& spec,
                               std::span<const std::uint64_t> group_seeds);

/// Adds an 11-dim offset to a box; sin/cos are renormalized when perturbed.
AnchorBox apply_offset(const AnchorBox& box, const Eigen::Ref<const Eigen::VectorXd>& offset);

double final_displacement(const Trajectory& traj);

double trajectory_noise_bound(const Trajectory& gt, double fraction = kTrajectoryNoiseFraction);

/// G copies of gt with uniform per-waypoint offsets in [-s, s]^2, s = fraction * FD.
std::vector<Trajectory> noise_trajectory(const Trajectory& gt, int groups, std::uint64_t seed,
                                         double fraction = kTrajectoryNoiseFraction);

double mean_displacement(const Trajectory& a, const Trajectory& b);

struct DenoiseContext {
  Trajectory gt;
  PlanContext plan;
};

/// Planning context around a scenario's ground truth: line from the GT path,
/// true road boundaries and GT agent futures, attraction weight on.
DenoiseContext make_denoise_context(const Scenario& scenario, const GridSpec& grid = {}, double attraction = 1.0);

struct DenoiseOutcome {
  Trajectory recovered;
  double residual_before = 0.0;
  double residual_after = 0.0;
};

DenoiseOutcome denoise_recover(const Trajectory& noised, const DenoiseContext& context, const RefineConfig& cfg);

struct DenoiseTrial {
  std::uint64_t seed = 0;
  int group = 0;
  double residual_before = 0.0;
  double residual_after = 0.0;
};

/// One row per (scenario seed, group): noise the GT plan, recover, measure.
std::vector<DenoiseTrial> denoise_trials(const std::string& template_id, std::span<const std::uint64_t> seeds,
                                         int groups, const RefineConfig& cfg, const TemplateParams& params = {});

}  // namespace sparseplan
