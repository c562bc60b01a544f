#include "sparseplan/denoise.hpp"

#include <cmath>

#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"

namespace sparseplan {

void NoiseSpec::validate() const {
  if (!(s >= 0.0)) throw Error(ErrorCode::Domain, "noise scale must be non-negative");
  if (groups < 1) throw Error(ErrorCode::Domain, "group count must be at least 1");
  for (double m : multipliers)
    if (!(m >= 0.0)) throw Error(ErrorCode::Domain, "noise multipliers must be non-negative");
}

AnchorBox apply_offset(const AnchorBox& box, const Eigen::Ref<const Eigen::VectorXd>& offset) {
  if (offset.size() != kBoxDims) throw Error(ErrorCode::Shape, "box offset must have 11 components");
  AnchorBox::Vector v = box.to_vector() + AnchorBox::Vector(offset);
  if (offset[6] != 0.0 || offset[7] != 0.0) {
    const double n = std::hypot(v[6], v[7]);
    if (n > 0.0) {
      v[6] /= n;
      v[7] /= n;
    } else {
      v[6] = box.sin_yaw;
      v[7] = box.cos_yaw;
    }
  }
  return AnchorBox::from_vector(v);
}

DenoiseGroup diffuse_positions(std::span<const AnchorBox> gt_boxes, const NoiseSpec& spec,
                               std::span<const std::uint64_t> group_seeds) {
  spec.validate();
  if (gt_boxes.empty()) throw Error(ErrorCode::EmptyInput, "position diffusion needs at least one box");
  const auto k = static_cast<Eigen::Index>(gt_boxes.size());
  DenoiseGroup out;
  for (std::uint64_t gs : group_seeds) {
    Rng rng(gs);
    Eigen::MatrixXd pos(k, kBoxDims), neg(k, kBoxDims);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (int d = 0; d < kBoxDims; ++d) {
        const double sc = spec.scale(d);
        pos(i, d) = sc > 0.0 ? rng.uniform(-sc, sc) : 0.0;
        if (sc > 0.0) {
          const double sign = rng.sign();
          neg(i, d) = sign * rng.uniform(sc, 2.0 * sc);
        } else {
          neg(i, d) = 0.0;
        }
      }
    }
    std::vector<AnchorBox> p, n;
    for (Eigen::Index i = 0; i < k; ++i) {
      p.push_back(apply_offset(gt_boxes[static_cast<std::size_t>(i)], pos.row(i).transpose()));
      n.push_back(apply_offset(gt_boxes[static_cast<std::size_t>(i)], neg.row(i).transpose()));
    }
    out.positives.push_back(std::move(p));
    out.negatives.push_back(std::move(n));
    out.positive_offsets.push_back(std::move(pos));
    out.negative_offsets.push_back(std::move(neg));
  }
  return out;
}

DenoiseGroup diffuse_positions(std::span<const AnchorBox> gt_boxes, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::uint64_t root = derive_seed(seed, "noise");
  std::vector<std::uint64_t> seeds;
  for (int g = 0; g < spec.groups; ++g) seeds.push_back(derive_seed(root, static_cast<std::uint64_t>(g)));
  return diffuse_positions(gt_boxes, spec, seeds);
}

double final_displacement(const Trajectory& traj) {
  if (traj.empty()) throw Error(ErrorCode::EmptyInput, "final displacement of an empty trajectory");
  return traj.points.col(traj.size() - 1).norm();
}

double trajectory_noise_bound(const Trajectory& gt, double fraction) { return fraction * final_displacement(gt); }

std::vector<Trajectory> noise_trajectory(const Trajectory& gt, int groups, std::uint64_t seed, double fraction) {
  if (groups < 1) throw Error(ErrorCode::Domain, "group count must be at least 1");
  const double s = trajectory_noise_bound(gt, fraction);
  const std::uint64_t root = derive_seed(seed, "noise");
  std::vector<Trajectory> out;
  for (int g = 0; g < groups; ++g) {
    Trajectory t = gt;
    if (s > 0.0) {
      Rng rng(derive_seed(root, static_cast<std::uint64_t>(g)));
      for (Eigen::Index c = 0; c < t.size(); ++c) {
        t.points(0, c) += rng.uniform(-s, s);
        t.points(1, c) += rng.uniform(-s, s);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

double mean_displacement(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::Shape, "trajectory lengths differ");
  if (a.empty()) return 0.0;
  return (a.points - b.points).colwise().norm().mean();
}

DenoiseContext make_denoise_context(const Scenario& scenario, const GridSpec& grid, double attraction) {
  DenoiseContext ctx;
  ctx.gt = scenario.ego_gt_future;
  ctx.plan.line = line_from_trajectory(scenario.ego_gt_future, grid);
  // Row sampling stops at the last row center; close the line on the final
  // waypoint so the attraction term is zero along the whole ground truth.
  if (!ctx.gt.empty() && !ctx.plan.line.points.empty()) {
    const Vector2 end = ctx.gt[ctx.gt.size() - 1];
    const ReferencePoint& last = ctx.plan.line.points.back();
    if ((end - last.point).norm() > 1e-9) ctx.plan.line.points.push_back({last.row + 1, end});
  }
  for (const auto& m : scenario.maps)
    if (m.kind == MapKind::Boundary) ctx.plan.boundaries.push_back(m);
  for (const auto& a : scenario.agents) ctx.plan.agent_futures.push_back(a.gt_future);
  ctx.plan.weights.attraction = attraction;
  return ctx;
}

DenoiseOutcome denoise_recover(const Trajectory& noised, const DenoiseContext& context, const RefineConfig& cfg) {
  PlanContext plan = context.plan;
  plan.d_safe = cfg.d_safe;
  const OptimizeResult r = optimize_plan(noised, plan, cfg);
  DenoiseOutcome out;
  out.recovered = r.refined;
  out.residual_before = mean_displacement(noised, context.gt);
  out.residual_after = mean_displacement(r.refined, context.gt);
  return out;
}

std::vector<DenoiseTrial> denoise_trials(const std::string& template_id, std::span<const std::uint64_t> seeds,
                                         int groups, const RefineConfig& cfg, const TemplateParams& params) {
  std::vector<DenoiseTrial> rows;
  for (std::uint64_t seed : seeds) {
    const Scenario s = gen_scenario(template_id, seed, params);
    const DenoiseContext ctx = make_denoise_context(s);
    const auto noised = noise_trajectory(s.ego_gt_future, groups, seed);
    for (int g = 0; g < groups; ++g) {
      const DenoiseOutcome o = denoise_recover(noised[static_cast<std::size_t>(g)], ctx, cfg);
      rows.push_back({seed, g, o.residual_before, o.residual_after});
    }
  }
  return rows;
}

}  // namespace sparseplan
