#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"
#include "sparseplan/scene.hpp"

using namespace sparseplan;

namespace {

BoxPose pose(double x, double y, double z, double w, double h, double l, double yaw, Eigen::Vector3d v) {
  BoxPose p;
  p.position = {x, y, z};
  p.width = w;
  p.height = h;
  p.length = l;
  p.yaw = yaw;
  p.velocity = v;
  return p;
}

}  // namespace

TEST(Anchor, IdentityCase) {
  const AnchorBox a = encode_anchor(pose(0, 0, 0, 1, 1, 1, 0, Eigen::Vector3d::Zero()));
  EXPECT_EQ(a.log_w, 0.0);
  EXPECT_EQ(a.log_h, 0.0);
  EXPECT_EQ(a.log_l, 0.0);
  EXPECT_EQ(a.sin_yaw, 0.0);
  EXPECT_EQ(a.cos_yaw, 1.0);
  const BoxPose d = decode_anchor(a);
  EXPECT_EQ(d.width, 1.0);
  EXPECT_EQ(d.length, 1.0);
}

TEST(Anchor, AnalyticLogs) {
  const double e = std::numbers::e;
  const AnchorBox a = encode_anchor(pose(2, 3, 0, e, e, e, std::numbers::pi / 2, {1, 0, 0}));
  EXPECT_NEAR(a.log_w, 1.0, 1e-15);
  EXPECT_NEAR(a.log_h, 1.0, 1e-15);
  EXPECT_NEAR(a.log_l, 1.0, 1e-15);
  EXPECT_NEAR(a.sin_yaw, 1.0, 1e-15);
  EXPECT_NEAR(a.cos_yaw, 0.0, 1e-15);
  EXPECT_EQ(a.x, 2.0);
  EXPECT_EQ(a.vx, 1.0);
}

TEST(Anchor, DecodeQuarterTurn) {
  AnchorBox a;
  a.sin_yaw = 1.0;
  a.cos_yaw = 0.0;
  EXPECT_DOUBLE_EQ(decode_anchor(a).yaw, std::numbers::pi / 2);
}

TEST(Anchor, NonPositiveDimensionThrows) {
  for (int k = 0; k < 3; ++k) {
    BoxPose p = pose(0, 0, 0, 1, 1, 1, 0, Eigen::Vector3d::Zero());
    (k == 0 ? p.width : k == 1 ? p.height : p.length) = k == 1 ? -1.0 : 0.0;
    try {
      encode_anchor(p);
      FAIL() << "expected an invalid-dimension error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidDimension);
    }
  }
}

TEST(Anchor, RoundTripProperty) {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const BoxPose p = pose(rng.uniform(-40, 40), rng.uniform(-20, 20), rng.uniform(-2, 2), rng.uniform(0.2, 10),
                           rng.uniform(0.2, 5), rng.uniform(0.2, 20), rng.uniform(-3.14, 3.14),
                           {rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-1, 1)});
    const AnchorBox a = encode_anchor(p);
    ASSERT_TRUE(is_valid(a));
    const BoxPose q = decode_anchor(a);
    EXPECT_NEAR(q.position.x(), p.position.x(), 1e-9);
    EXPECT_NEAR(q.position.y(), p.position.y(), 1e-9);
    EXPECT_NEAR(q.width, p.width, 1e-9);
    EXPECT_NEAR(q.height, p.height, 1e-9);
    EXPECT_NEAR(q.length, p.length, 1e-9);
    EXPECT_NEAR(q.yaw, p.yaw, 1e-9);
    EXPECT_NEAR((q.velocity - p.velocity).norm(), 0.0, 1e-9);
    // decode then encode is a fixed point
    const AnchorBox b = encode_anchor(q);
    EXPECT_NEAR((b.to_vector() - a.to_vector()).norm(), 0.0, 1e-9);
  }
}

TEST(Polyline, StraightHasTwentyDistinctPoints) {
  const MapPolyline m = straight_polyline(1, MapKind::Boundary, {-30, 5}, {30, 5});
  EXPECT_EQ(m.points.cols(), kMapPoints);
  for (int k = 1; k < kMapPoints; ++k) EXPECT_GT((m.points.col(k) - m.points.col(k - 1)).norm(), 1e-6);
  EXPECT_EQ(m.points(0, 0), -30.0);
  EXPECT_EQ(m.points(0, kMapPoints - 1), 30.0);
}

TEST(Rollout, ConstantVelocity) {
  const Trajectory t = ctrv_rollout({0, 0}, 0.0, 2.0, 0.0);
  ASSERT_EQ(t.size(), 6);
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(t[k].x(), k + 1.0, 1e-12);
    EXPECT_NEAR(t[k].y(), 0.0, 1e-12);
  }
}

TEST(Generate, EmptyTemplate) {
  for (std::uint64_t seed : {0ull, 5ull, 999ull}) {
    const Scenario s = gen_scenario("empty", seed);
    EXPECT_TRUE(s.agents.empty());
    EXPECT_EQ(s.ego_intent.command, Command::KeepForward);
    for (Eigen::Index t = 0; t < s.ego_gt_future.size(); ++t) EXPECT_EQ(s.ego_gt_future[t].y(), 0.0);
    EXPECT_EQ(s.ego_box.x, 0.0);
    EXPECT_EQ(s.ego_box.cos_yaw, 1.0);
  }
}

TEST(Generate, Deterministic) {
  const Scenario a = gen_scenario("cut_in", 7);
  const Scenario b = gen_scenario("cut_in", 7);
  ASSERT_EQ(a.agents.size(), b.agents.size());
  for (std::size_t k = 0; k < a.agents.size(); ++k) {
    EXPECT_EQ(a.agents[k].box.to_vector(), b.agents[k].box.to_vector());
    EXPECT_EQ(a.agents[k].gt_future, b.agents[k].gt_future);
  }
  EXPECT_EQ(a.ego_gt_future, b.ego_gt_future);
  ASSERT_EQ(a.maps.size(), b.maps.size());
  for (std::size_t k = 0; k < a.maps.size(); ++k) EXPECT_EQ(a.maps[k].points, b.maps[k].points);
}

TEST(Generate, UnknownTemplateThrows) {
  try {
    gen_scenario("roundabout", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownTemplate);
  }
}

TEST(Generate, LeftTurnHasCorridorConflict) {
  const Scenario s = gen_scenario("intersection_left", 3);
  double best = 1e9;
  for (const Agent& a : s.agents)
    for (Eigen::Index i = 0; i < a.gt_future.size(); ++i)
      for (Eigen::Index j = 0; j < s.ego_gt_future.size(); ++j)
        best = std::min(best, (a.gt_future[i] - s.ego_gt_future[j]).norm());
  EXPECT_LT(best, 3.0);
  EXPECT_GT(s.ego_gt_future[5].y(), 0.5);  // curves left
}

TEST(Generate, CommandMatchesCurvature) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_GT(gen_scenario("intersection_left", seed).ego_gt_future[5].y(), 0.5);
    EXPECT_LT(gen_scenario("intersection_right", seed).ego_gt_future[5].y(), -0.5);
    EXPECT_EQ(gen_scenario("intersection_left", seed).ego_intent.command, Command::TurnLeft);
    EXPECT_EQ(gen_scenario("intersection_right", seed).ego_intent.command, Command::TurnRight);
  }
}

TEST(Generate, InvariantsAcrossTemplates) {
  for (auto id : kTemplateIds) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scenario s = gen_scenario(id, seed);
      EXPECT_LE(static_cast<int>(s.agents.size()), kMaxAgents);
      for (const Agent& a : s.agents) {
        EXPECT_TRUE(is_valid(a.box));
        EXPECT_LE(std::abs(a.box.x), 40.0);
        EXPECT_LE(std::abs(a.box.y), 25.0);
        Vector2 prev = a.box.position();
        for (Eigen::Index t = 0; t < a.gt_future.size(); ++t) {
          EXPECT_LE((a.gt_future[t] - prev).norm(), kMaxAgentSpeed * kWaypointDt + 1e-9);
          prev = a.gt_future[t];
        }
        // chord of the first interval never exceeds the distance the box speed covers
        EXPECT_LE((a.gt_future[0] - a.box.position()).norm(), a.box.speed() * kWaypointDt + 1e-9);
      }
      for (const MapPolyline& m : s.maps)
        for (int k = 1; k < kMapPoints; ++k) EXPECT_GT((m.points.col(k) - m.points.col(k - 1)).norm(), 1e-6);
    }
  }
}

TEST(Perception, ZeroNoiseIsIdentity) {
  const Scenario s = gen_scenario("straight_traffic", 4);
  const Perception p = perturb_perception(s, {}, 11);
  ASSERT_EQ(p.agents.size(), s.agents.size());
  for (std::size_t k = 0; k < s.agents.size(); ++k) {
    EXPECT_EQ(p.agents[k].box.to_vector(), s.agents[k].box.to_vector());
    EXPECT_EQ(p.agents[k].confidence, 1.0);
  }
  ASSERT_EQ(p.maps.size(), s.maps.size());
  for (std::size_t k = 0; k < s.maps.size(); ++k) {
    EXPECT_EQ(p.maps[k].polyline.points, s.maps[k].points);
    EXPECT_EQ(p.maps[k].confidence, 1.0);
  }
}

TEST(Perception, DropReproducible) {
  Scenario s = gen_scenario("empty", 0);
  for (int k = 0; k < 10; ++k) {
    Agent a;
    a.id = k + 1;
    a.box = encode_anchor(pose(10.0 + k, 8, 0, 1.8, 1.5, 4.5, 0, Eigen::Vector3d::Zero()));
    a.gt_future = ctrv_rollout(a.box.position(), 0, 0, 0);
    s.agents.push_back(a);
  }
  PerceptionNoise n;
  n.drop_rate = 1.0 - 1e-3;
  const auto a = perturb_perception(s, n, 3);
  const auto b = perturb_perception(s, n, 3);
  EXPECT_LT(a.agents.size(), 10u);
  EXPECT_EQ(a.agents.size(), b.agents.size());
}

TEST(Perception, PositionNoiseStd) {
  Scenario s = gen_scenario("empty", 0);
  Agent a;
  a.id = 1;
  a.box = encode_anchor(pose(5, 8, 0, 1.8, 1.5, 4.5, 0, Eigen::Vector3d::Zero()));
  a.gt_future = ctrv_rollout(a.box.position(), 0, 0, 0);
  s.agents.push_back(a);
  PerceptionNoise n;
  n.sigma_xy = 0.5;
  double sum = 0, sum2 = 0;
  const int draws = 1000;
  for (int k = 0; k < draws; ++k) {
    const double dx = perturb_perception(s, n, static_cast<std::uint64_t>(k)).agents.at(0).box.x - 5.0;
    sum += dx;
    sum2 += dx * dx;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sum2 / draws - mean * mean);
  EXPECT_NEAR(sd, 0.5, 0.05);
}

TEST(Perception, ConfidenceInRange) {
  const Scenario s = gen_scenario("cut_in", 2);
  PerceptionNoise n{0.8, 0.1, 0.2, 1.0, 0.1};
  const auto p = perturb_perception(s, n, 5);
  for (const auto& a : p.agents) {
    EXPECT_GE(a.confidence, 0.05);
    EXPECT_LE(a.confidence, 1.0);
  }
  EXPECT_EQ(perception_confidence(0, 0, 0, 0), 1.0);
  EXPECT_EQ(perception_confidence(100, 0, 0, 0), 0.05);
}

TEST(Seeds, NamedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, "scenario"), derive_seed(1, "perception"));
  EXPECT_NE(derive_seed(1, "noise"), derive_seed(1, "init"));
  EXPECT_EQ(derive_seed(9, "noise"), derive_seed(9, "noise"));
}
