#include "sparseplan/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"

namespace sparseplan {

void SelectionSchedule::validate() const {
  if (agent_fractions.empty() || agent_fractions.size() != map_fractions.size())
    throw Error(ErrorCode::Domain, "selection schedule needs M >= 1 fractions per branch");
  for (const auto* list : {&agent_fractions, &map_fractions}) {
    for (std::size_t i = 0; i < list->size(); ++i) {
      const double f = (*list)[i];
      if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::Domain, "keep fractions must lie in (0, 1]");
      if (i > 0 && !(f < (*list)[i - 1])) throw Error(ErrorCode::Domain, "keep fractions must strictly decrease");
    }
  }
}

std::size_t keep_count(double fraction, std::size_t initial) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(initial)));
  return std::max<std::size_t>(1, k);
}

namespace {

AttentionHead make_head(Eigen::Index c, Rng& rng) {
  auto mat = [&](Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
  };
  return {mat(c, 2 * c), mat(c, 2 * c), mat(c, 2 * c)};
}

std::vector<DualLayerParams> make_layers(Eigen::Index c, int layers, Rng& rng) {
  std::vector<DualLayerParams> out;
  for (int i = 0; i < layers; ++i) {
    DualLayerParams p;
    p.cross = make_head(c, rng);
    p.self = make_head(c, rng);
    out.push_back(std::move(p));
  }
  return out;
}

Eigen::VectorXd anchor_features(const AnchorBox& a) {
  Eigen::VectorXd v = a.to_vector();
  v[0] /= 30.0;
  v[1] /= 15.0;
  v.tail<3>() /= 10.0;
  return v;
}

Eigen::VectorXd polyline_features(const MapPolyline& m) {
  Eigen::VectorXd v(2 * kMapPoints);
  for (int k = 0; k < kMapPoints; ++k) {
    v[2 * k] = m.points(0, k) / 30.0;
    v[2 * k + 1] = m.points(1, k) / 15.0;
  }
  return v;
}

}  // namespace

InteractionParams make_interaction_params(Eigen::Index channels, int layers, std::uint64_t seed) {
  if (channels < 4 || channels % 4 != 0) throw Error(ErrorCode::Shape, "channels must be a multiple of 4");
  Rng rng(derive_seed(seed, "init"));
  InteractionParams p;
  p.channels = channels;
  p.agent_layers = make_layers(channels, layers, rng);
  p.map_layers = make_layers(channels, layers, rng);
  using netlet::Activation;
  p.agent_encoder = netlet::make_mlp<double>({11, channels, channels}, {Activation::Relu, Activation::Identity}, rng);
  p.map_encoder =
      netlet::make_mlp<double>({2 * kMapPoints, channels, channels}, {Activation::Relu, Activation::Identity}, rng);
  p.ego_query.resize(channels);
  for (Eigen::Index i = 0; i < channels; ++i) p.ego_query[i] = rng.normal(0.0, 1.0);
  return p;
}

QueryEmbedding make_ego_query(const InteractionParams& params) {
  QueryEmbedding q;
  q.feature = params.ego_query;
  q.kind = QueryKind::Ego;
  q.id = -1;
  return q;
}

QueryEmbedding make_agent_query(const PerceivedAgent& agent, const InteractionParams& params) {
  QueryEmbedding q;
  q.feature = netlet::mlp_forward(params.agent_encoder, anchor_features(agent.box));
  q.position = agent.box.position();
  q.confidence = agent.confidence;
  q.kind = QueryKind::Agent;
  q.id = agent.id;
  return q;
}

QueryEmbedding make_map_query(const PerceivedMap& map, const InteractionParams& params) {
  QueryEmbedding q;
  q.feature = netlet::mlp_forward(params.map_encoder, polyline_features(map.polyline));
  q.position = map.polyline.points.rowwise().mean();
  q.confidence = map.confidence;
  q.kind = QueryKind::Map;
  q.id = map.polyline.id;
  q.geo_points = map.polyline.points;
  return q;
}

Eigen::VectorXd decoupled_input(const QueryEmbedding& q) {
  const Eigen::Index c = q.feature.size();
  Eigen::VectorXd x(2 * c);
  x.head(c) = q.feature;
  x.tail(c) = netlet::position_embedding(q.position, c);
  return x;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw Error(ErrorCode::EmptyInput, "softmax of an empty vector");
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

namespace {

Eigen::MatrixXd stacked_inputs(std::span<const QueryEmbedding> objects) {
  const Eigen::Index c = objects.front().feature.size();
  Eigen::MatrixXd x(2 * c, static_cast<Eigen::Index>(objects.size()));
  for (std::size_t k = 0; k < objects.size(); ++k) {
    if (objects[k].feature.size() != c) throw Error(ErrorCode::Shape, "query widths differ");
    x.col(static_cast<Eigen::Index>(k)) = decoupled_input(objects[k]);
  }
  return x;
}

}  // namespace

AttentionResult decoupled_attention(const QueryEmbedding& ego, std::span<const QueryEmbedding> objects,
                                    const AttentionHead& head) {
  if (objects.empty()) throw Error(ErrorCode::EmptyInput, "attention over an empty object set");
  if (ego.feature.size() != objects.front().feature.size()) throw Error(ErrorCode::Shape, "query widths differ");
  const Eigen::MatrixXd x = stacked_inputs(objects);
  const Eigen::VectorXd q = head.query * decoupled_input(ego);
  const Eigen::MatrixXd k = head.key * x;
  const Eigen::MatrixXd v = head.value * x;
  AttentionResult r;
  r.logits = (k.transpose() * q) / std::sqrt(static_cast<double>(q.size()));
  r.s_attn = softmax(r.logits);
  r.ego_feature = ego.feature + v * r.s_attn;
  return r;
}

double fuse_scores(double s_attn, double s_geo, double s_cls) {
  for (double s : {s_attn, s_geo, s_cls}) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::Domain, "score factors must lie in [0, 1]");
  }
  return s_attn * s_geo * s_cls;
}

double query_geo_score(const BevGrid& m_d, const QueryEmbedding& q) {
  if (q.geo_points.cols() == 0) return sample_geo_score(m_d, q.position);
  double best = 0.0;
  for (Eigen::Index k = 0; k < q.geo_points.cols(); ++k)
    best = std::max(best, sample_geo_score(m_d, q.geo_points.col(k)));
  return best;
}

DualLayerResult dual_interaction_layer(const QueryEmbedding& ego, std::span<const QueryEmbedding> objects,
                                       const BevGrid& m_d, const DualLayerParams& params) {
  const AttentionResult cross = decoupled_attention(ego, objects, params.cross);
  DualLayerResult out;
  out.ego = ego;
  out.ego.feature = cross.ego_feature;

  // Object-centric self attention, synchronous over the current set.
  const Eigen::MatrixXd x = stacked_inputs(objects);
  const Eigen::MatrixXd q = params.self.query * x;
  const Eigen::MatrixXd k = params.self.key * x;
  const Eigen::MatrixXd v = params.self.value * x;
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.rows()));
  out.objects.assign(objects.begin(), objects.end());
  out.scores.resize(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd w = softmax((k.transpose() * q.col(col)) * scale);
    out.objects[i].feature = objects[i].feature + v * w;

    ScoreBreakdown& s = out.scores[i];
    s.s_attn = cross.s_attn[col];
    s.s_geo = query_geo_score(m_d, objects[i]);
    s.s_cls = objects[i].confidence;
    s.s_inter = fuse_scores(s.s_attn, s.s_geo, s.s_cls);
  }
  return out;
}

std::vector<std::size_t> top_k_by_score(std::span<const ScoreBreakdown> scores, std::span<const int> ids,
                                        std::size_t k) {
  if (scores.size() != ids.size()) throw Error(ErrorCode::Shape, "score and id counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].s_inter != scores[b].s_inter) return scores[a].s_inter > scores[b].s_inter;
    return ids[a] < ids[b];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

namespace {

BranchResult run_branch(const QueryEmbedding& ego, std::vector<QueryEmbedding> objects, const BevGrid& m_d,
                        const std::vector<double>& fractions, const std::vector<DualLayerParams>& layers) {
  BranchResult out;
  out.ego_feature = ego.feature;
  if (objects.empty()) return out;
  if (layers.size() < fractions.size()) throw Error(ErrorCode::Shape, "fewer layer parameters than schedule layers");

  auto by_id = [](const QueryEmbedding& a, const QueryEmbedding& b) { return a.id < b.id; };
  std::stable_sort(objects.begin(), objects.end(), by_id);
  const std::size_t initial = objects.size();
  QueryEmbedding current_ego = ego;

  for (std::size_t layer = 0; layer < fractions.size() && !objects.empty(); ++layer) {
    DualLayerResult r = dual_interaction_layer(current_ego, objects, m_d, layers[layer]);
    std::vector<int> ids;
    for (const auto& o : objects) ids.push_back(o.id);
    const std::size_t keep = std::min(keep_count(fractions[layer], initial), objects.size());
    std::vector<bool> kept(objects.size(), false);
    for (std::size_t idx : top_k_by_score(r.scores, ids, keep)) kept[idx] = true;

    SelectionLayerTrace trace;
    trace.layer = static_cast<int>(layer) + 1;
    trace.keep = keep;
    std::vector<QueryEmbedding> survivors;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      trace.entries.push_back({objects[i].id, r.scores[i], kept[i]});
      if (kept[i]) survivors.push_back(std::move(r.objects[i]));
    }
    out.layers.push_back(std::move(trace));
    objects = std::move(survivors);
    current_ego = std::move(r.ego);
  }
  out.kept = std::move(objects);
  out.ego_feature = current_ego.feature;
  return out;
}

}  // namespace

SelectionResult coarse_to_fine_select(const QueryEmbedding& ego, std::vector<QueryEmbedding> agents,
                                      std::vector<QueryEmbedding> maps, const BevGrid& m_d,
                                      const SelectionSchedule& schedule, const InteractionParams& params) {
  schedule.validate();
  SelectionResult out;
  out.agents = run_branch(ego, std::move(agents), m_d, schedule.agent_fractions, params.agent_layers);
  out.maps = run_branch(ego, std::move(maps), m_d, schedule.map_fractions, params.map_layers);
  const Eigen::Index c = ego.feature.size();
  out.ego_feature.resize(2 * c);
  out.ego_feature.head(c) = out.agents.ego_feature;
  out.ego_feature.tail(c) = out.maps.ego_feature;
  return out;
}

}  // namespace sparseplan
