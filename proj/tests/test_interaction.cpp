#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sparseplan/error.hpp"
#include "sparseplan/interaction.hpp"
#include "sparseplan/rng.hpp"

using namespace sparseplan;

namespace {

constexpr Eigen::Index kC = 16;

QueryEmbedding object(int id, const Vector2& pos, double conf, Rng& rng) {
  QueryEmbedding q;
  q.feature.resize(kC);
  for (Eigen::Index i = 0; i < kC; ++i) q.feature[i] = rng.normal(0, 1);
  q.position = pos;
  q.confidence = conf;
  q.id = id;
  return q;
}

std::vector<QueryEmbedding> random_objects(std::size_t n, Rng& rng, int id0 = 0) {
  std::vector<QueryEmbedding> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(object(id0 + static_cast<int>(k), {rng.uniform(-25, 25), rng.uniform(-12, 12)},
                         rng.uniform(0.05, 1.0), rng));
  return out;
}

// Smooth synthetic distance map: 1 on the x axis, decaying laterally.
BevGrid lateral_map() {
  BevGrid g(GridSpec{});
  for (Eigen::Index i = 0; i < g.values.rows(); ++i)
    for (Eigen::Index j = 0; j < g.values.cols(); ++j)
      g.values(i, j) = geo_normalize(std::abs(g.spec.col_y(j)) + 0.1 * std::abs(g.spec.row_x(i)));
  return g;
}

// Independent bilinear lookup over cell centers (interior points only).
double oracle_sample(const BevGrid& g, const Vector2& p) {
  const double fi = (p.x() - g.spec.x_min) / g.spec.cell - 0.5;
  const double fj = (p.y() - g.spec.y_min) / g.spec.cell - 0.5;
  const int i = static_cast<int>(std::floor(fi)), j = static_cast<int>(std::floor(fj));
  const double a = fi - i, b = fj - j;
  return (1 - a) * (1 - b) * g.values(i, j) + (1 - a) * b * g.values(i, j + 1) + a * (1 - b) * g.values(i + 1, j) +
         a * b * g.values(i + 1, j + 1);
}

std::set<int> ids_of(const std::vector<QueryEmbedding>& qs) {
  std::set<int> s;
  for (const auto& q : qs) s.insert(q.id);
  return s;
}

}  // namespace

TEST(Softmax, HandValues) {
  const Eigen::VectorXd s = softmax(Eigen::Vector2d(std::log(3.0), 0.0));
  EXPECT_NEAR(s[0], 0.75, 1e-15);
  EXPECT_NEAR(s[1], 0.25, 1e-15);
  EXPECT_NEAR(softmax(Eigen::Vector2d(1000.0, 1000.0))[0], 0.5, 1e-15);
  EXPECT_THROW(softmax(Eigen::VectorXd()), Error);
}

TEST(Attention, CraftedLogits) {
  AttentionHead head{Eigen::MatrixXd::Zero(4, 8), Eigen::MatrixXd::Zero(4, 8), Eigen::MatrixXd::Zero(4, 8)};
  head.query(0, 0) = 1.0;
  head.key(0, 0) = 1.0;
  QueryEmbedding ego;
  ego.feature = Eigen::Vector4d(1, 0, 0, 0);
  QueryEmbedding a = ego, b = ego;
  a.feature[0] = 2.0 * std::log(3.0);  // divided by sqrt(d_k) = 2
  b.feature[0] = 0.0;
  const std::vector<QueryEmbedding> objs = {a, b};
  const AttentionResult r = decoupled_attention(ego, objs, head);
  EXPECT_NEAR(r.s_attn[0], 0.75, 1e-12);
  EXPECT_NEAR(r.s_attn[1], 0.25, 1e-12);
  EXPECT_EQ(r.ego_feature, ego.feature);  // zero value projection
}

TEST(Attention, IdenticalObjectsUniform) {
  Rng rng(1);
  const InteractionParams p = make_interaction_params(kC, 1, 1);
  const QueryEmbedding o = object(0, {3, 1}, 0.5, rng);
  const std::vector<QueryEmbedding> objs(7, o);
  const AttentionResult r = decoupled_attention(make_ego_query(p), objs, p.agent_layers[0].cross);
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(r.s_attn[i], 1.0 / 7.0, 1e-15);
}

TEST(Attention, SumsToOne) {
  Rng rng(2);
  const InteractionParams p = make_interaction_params(kC, 1, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto objs = random_objects(1 + rng.uniform_int(0, 30), rng);
    const AttentionResult r = decoupled_attention(make_ego_query(p), objs, p.agent_layers[0].cross);
    EXPECT_NEAR(r.s_attn.sum(), 1.0, 1e-9);
    EXPECT_GE(r.s_attn.minCoeff(), 0.0);
  }
}

TEST(Attention, EmptyThrows) {
  const InteractionParams p = make_interaction_params(kC, 1, 3);
  try {
    decoupled_attention(make_ego_query(p), {}, p.agent_layers[0].cross);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(Fuse, Examples) {
  EXPECT_DOUBLE_EQ(fuse_scores(0.5, 1.0, 1.0), 0.5);
  EXPECT_NEAR(fuse_scores(0.4, 0.9, 0.5), 0.18, 1e-15);
  EXPECT_EQ(fuse_scores(0.0, 0.7, 0.3), 0.0);
  EXPECT_EQ(fuse_scores(0.7, 0.0, 0.3), 0.0);
  EXPECT_EQ(fuse_scores(0.7, 0.3, 0.0), 0.0);
  for (double bad : {-0.1, 1.1, std::nan("")}) {
    try {
      fuse_scores(bad, 0.5, 0.5);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Domain);
    }
    EXPECT_THROW(fuse_scores(0.5, bad, 0.5), Error);
    EXPECT_THROW(fuse_scores(0.5, 0.5, bad), Error);
  }
}

TEST(Fuse, MonotoneInEachFactor) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    double f[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double base = fuse_scores(f[0], f[1], f[2]);
    const int k = trial % 3;
    f[k] = f[k] + (1.0 - f[k]) * rng.uniform();
    EXPECT_GE(fuse_scores(f[0], f[1], f[2]), base);
  }
}

TEST(DualLayer, SingleObject) {
  Rng rng(5);
  const InteractionParams p = make_interaction_params(kC, 1, 5);
  const BevGrid m_d = lateral_map();
  const std::vector<QueryEmbedding> objs = {object(3, {4.1, 1.3}, 0.8, rng)};
  const DualLayerResult r = dual_interaction_layer(make_ego_query(p), objs, m_d, p.agent_layers[0]);
  EXPECT_DOUBLE_EQ(r.scores[0].s_attn, 1.0);
  EXPECT_DOUBLE_EQ(r.scores[0].s_inter, r.scores[0].s_geo * 0.8);
}

TEST(DualLayer, ConfidenceOrdersIdenticalObjects) {
  Rng rng(6);
  const InteractionParams p = make_interaction_params(kC, 1, 6);
  QueryEmbedding a = object(0, {5, 0.5}, 0.9, rng);
  QueryEmbedding b = a;
  b.id = 1;
  b.confidence = 0.1;
  const std::vector<QueryEmbedding> objs = {a, b};
  const DualLayerResult r = dual_interaction_layer(make_ego_query(p), objs, lateral_map(), p.agent_layers[0]);
  EXPECT_GT(r.scores[0].s_inter, r.scores[1].s_inter);
}

TEST(DualLayer, CompositionalOracle) {
  Rng rng(7);
  const InteractionParams p = make_interaction_params(kC, 1, 7);
  const BevGrid m_d = lateral_map();
  const QueryEmbedding ego = make_ego_query(p);
  for (int trial = 0; trial < 50; ++trial) {
    const auto objs = random_objects(12, rng);
    const DualLayerResult r = dual_interaction_layer(ego, objs, m_d, p.agent_layers[0]);
    const AttentionHead& h = p.agent_layers[0].cross;
    std::vector<double> logits;
    const Eigen::VectorXd q = h.query * decoupled_input(ego);
    for (const auto& o : objs) logits.push_back((h.key * decoupled_input(o)).dot(q) / std::sqrt(double(kC)));
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const double attn = std::exp(logits[i] - mx) / z;
      const double expect = attn * oracle_sample(m_d, objs[i].position) * objs[i].confidence;
      EXPECT_NEAR(r.scores[i].s_inter, expect, 1e-9);
    }
  }
}

TEST(TopK, PicksLargestAndBreaksTiesById) {
  std::vector<ScoreBreakdown> s(5);
  const double v[5] = {0.1, 0.5, 0.3, 0.9, 0.2};
  for (int i = 0; i < 5; ++i) s[i].s_inter = v[i];
  const std::vector<int> ids = {10, 11, 12, 13, 14};
  EXPECT_EQ(top_k_by_score(s, ids, 2), (std::vector<std::size_t>{3, 1}));
  s[2].s_inter = 0.9;
  EXPECT_EQ(top_k_by_score(s, std::vector<int>{10, 11, 12, 13, 14}, 1), std::vector<std::size_t>{2});
  EXPECT_EQ(top_k_by_score(s, std::vector<int>{10, 11, 99, 13, 14}, 1), std::vector<std::size_t>{3});
  EXPECT_EQ(top_k_by_score(s, ids, 9).size(), 5u);
  EXPECT_THROW(top_k_by_score(s, std::vector<int>{1}, 1), Error);
}

TEST(Schedule, KeepCountsAndValidation) {
  EXPECT_EQ(keep_count(0.02, 900), 18u);
  EXPECT_EQ(keep_count(0.02, 10), 1u);
  EXPECT_EQ(keep_count(0.2, 100), 20u);
  SelectionSchedule s;
  EXPECT_NO_THROW(s.validate());
  s.agent_fractions = {0.2, 0.2, 0.02};
  EXPECT_THROW(s.validate(), Error);
  s.agent_fractions = {0.2, 0.05};
  EXPECT_THROW(s.validate(), Error);
  s = SelectionSchedule{{1.5}, {0.5}};
  EXPECT_THROW(s.validate(), Error);
}

TEST(Select, NineHundredToEighteen) {
  Rng rng(8);
  const InteractionParams p = make_interaction_params(kC, 3, 8);
  const auto agents = random_objects(900, rng);
  const auto maps = random_objects(100, rng, 1000);
  const SelectionResult r = coarse_to_fine_select(make_ego_query(p), agents, maps, lateral_map(), {}, p);
  EXPECT_EQ(r.agents.kept.size(), 18u);
  EXPECT_EQ(r.maps.kept.size(), 2u);
  ASSERT_EQ(r.agents.layers.size(), 3u);
  EXPECT_EQ(r.agents.layers[0].keep, 180u);
  EXPECT_EQ(r.agents.layers[1].keep, 45u);
  EXPECT_EQ(r.agents.layers[1].entries.size(), 180u);
  EXPECT_EQ(r.ego_feature.size(), 2 * kC);
  EXPECT_EQ(r.ego_feature.head(kC), r.agents.ego_feature);
  EXPECT_EQ(r.ego_feature.tail(kC), r.maps.ego_feature);
}

TEST(Select, OneLayerKeepsTopTwo) {
  Rng rng(9);
  const InteractionParams p = make_interaction_params(kC, 1, 9);
  const auto objs = random_objects(5, rng);
  const SelectionSchedule sched{{0.4}, {0.4}};
  const SelectionResult r = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), sched, p);
  const auto& entries = r.agents.layers[0].entries;
  std::vector<std::pair<double, int>> ranked;
  for (const auto& e : entries) ranked.push_back({e.scores.s_inter, e.id});
  std::sort(ranked.rbegin(), ranked.rend());
  EXPECT_EQ(ids_of(r.agents.kept), (std::set<int>{ranked[0].second, ranked[1].second}));
}

TEST(Select, TiesKeepLowerIdUnderPermutation) {
  Rng rng(10);
  const InteractionParams p = make_interaction_params(kC, 1, 10);
  QueryEmbedding base = object(0, {6, 0.2}, 0.7, rng);
  std::vector<QueryEmbedding> objs;
  for (int id : {7, 3, 9, 5}) {
    QueryEmbedding q = base;
    q.id = id;
    objs.push_back(q);
  }
  const SelectionSchedule sched{{0.5}, {0.5}};
  for (int perm = 0; perm < 24; ++perm) {
    std::vector<QueryEmbedding> shuffled = objs;
    std::vector<int> order(4);
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < perm; ++k) std::next_permutation(order.begin(), order.end());
    for (int k = 0; k < 4; ++k) shuffled[k] = objs[order[k]];
    const SelectionResult r = coarse_to_fine_select(make_ego_query(p), shuffled, {}, lateral_map(), sched, p);
    EXPECT_EQ(ids_of(r.agents.kept), (std::set<int>{3, 5}));
  }
}

TEST(Select, PermutationInvariantRandomSets) {
  Rng rng(11);
  const InteractionParams p = make_interaction_params(kC, 3, 11);
  for (int trial = 0; trial < 20; ++trial) {
    auto objs = random_objects(60, rng);
    const auto a = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), {}, p);
    std::reverse(objs.begin(), objs.end());
    std::rotate(objs.begin(), objs.begin() + 17, objs.end());
    const auto b = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), {}, p);
    EXPECT_EQ(ids_of(a.agents.kept), ids_of(b.agents.kept));
  }
}

TEST(Select, KeptSizeIsMinOfKAndSurvivors) {
  Rng rng(12);
  const InteractionParams p = make_interaction_params(kC, 3, 12);
  for (std::size_t n : {1u, 2u, 7u, 33u, 120u}) {
    const auto objs = random_objects(n, rng);
    const SelectionSchedule sched;
    const auto r = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), sched, p);
    std::size_t survivors = n;
    for (std::size_t i = 0; i < r.agents.layers.size(); ++i) {
      const std::size_t expect = std::min(keep_count(sched.agent_fractions[i], n), survivors);
      EXPECT_EQ(r.agents.layers[i].entries.size(), survivors);
      const auto kept = std::count_if(r.agents.layers[i].entries.begin(), r.agents.layers[i].entries.end(),
                                      [](const SelectionTraceEntry& e) { return e.kept; });
      EXPECT_EQ(static_cast<std::size_t>(kept), expect);
      survivors = expect;
    }
    EXPECT_EQ(r.agents.kept.size(), survivors);
  }
}

TEST(Select, ConfidenceScalingKeepsRanking) {
  Rng rng(13);
  const InteractionParams p = make_interaction_params(kC, 3, 13);
  for (int trial = 0; trial < 20; ++trial) {
    auto objs = random_objects(80, rng);
    const auto a = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), {}, p);
    const double c = rng.uniform(0.1, 1.0);
    for (auto& o : objs) o.confidence *= c;
    const auto b = coarse_to_fine_select(make_ego_query(p), objs, {}, lateral_map(), {}, p);
    EXPECT_EQ(ids_of(a.agents.kept), ids_of(b.agents.kept));
  }
}

TEST(Select, EmptyBranchLeavesOtherRunning) {
  Rng rng(14);
  const InteractionParams p = make_interaction_params(kC, 3, 14);
  const auto maps = random_objects(40, rng, 500);
  const auto r = coarse_to_fine_select(make_ego_query(p), {}, maps, lateral_map(), {}, p);
  EXPECT_TRUE(r.agents.kept.empty());
  EXPECT_TRUE(r.agents.layers.empty());
  EXPECT_EQ(r.agents.ego_feature, p.ego_query);
  EXPECT_EQ(r.maps.kept.size(), 1u);
  const auto r2 = coarse_to_fine_select(make_ego_query(p), maps, {}, lateral_map(), {}, p);
  EXPECT_TRUE(r2.maps.kept.empty());
  EXPECT_EQ(r2.agents.kept.size(), 1u);
}

TEST(Params, DeterministicInit) {
  const InteractionParams a = make_interaction_params(kC, 2, 42), b = make_interaction_params(kC, 2, 42);
  EXPECT_EQ(a.ego_query, b.ego_query);
  EXPECT_EQ(a.agent_layers[1].self.key, b.agent_layers[1].self.key);
  EXPECT_NE(make_interaction_params(kC, 2, 43).ego_query, a.ego_query);
  EXPECT_THROW(make_interaction_params(6, 1, 1), Error);
}
