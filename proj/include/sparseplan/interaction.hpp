#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "sparseplan/bevgrid.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan {

enum class QueryKind { Agent, Map, Ego };

struct QueryEmbedding {
  Eigen::VectorXd feature;
  Vector2 position = Vector2::Zero();
  double confidence = 1.0;
  QueryKind kind = QueryKind::Agent;
  int id = 0;
  /// Points at which the distance map is sampled; empty means `position`.
  Eigen::Matrix2Xd geo_points;
};

struct ScoreBreakdown {
  double s_attn = 0.0;
  double s_geo = 0.0;
  double s_cls = 0.0;
  double s_inter = 0.0;
};

/// Keep fractions applied after each dual-interaction layer, per branch.
struct SelectionSchedule {
  std::vector<double> agent_fractions = {0.20, 0.05, 0.02};
  std::vector<double> map_fractions = {0.20, 0.05, 0.02};

  int layers() const { return static_cast<int>(agent_fractions.size()); }
  /// Throws a domain error unless both lists have equal length M >= 1 and
  /// strictly decreasing entries in (0, 1].
  void validate() const;
};

/// K_i = max(1, round(fraction * initial)).
std::size_t keep_count(double fraction, std::size_t initial);

/// Single-head decoupled attention: queries and keys are [feature | pos-embed]
/// projected to d_k = C; values likewise projected to C.
struct AttentionHead {
  Eigen::MatrixXd query;  // d_k x 2C
  Eigen::MatrixXd key;    // d_k x 2C
  Eigen::MatrixXd value;  // C x 2C
};

struct DualLayerParams {
  AttentionHead cross;  // ego -> objects
  AttentionHead self;   // objects <-> objects
};

struct InteractionParams {
  Eigen::Index channels = 16;
  std::vector<DualLayerParams> agent_layers;
  std::vector<DualLayerParams> map_layers;
  netlet::DenseNet agent_encoder;  // 11 -> C
  netlet::DenseNet map_encoder;    // 40 -> C
  Eigen::VectorXd ego_query;       // C
};

InteractionParams make_interaction_params(Eigen::Index channels, int layers, std::uint64_t seed);

QueryEmbedding make_ego_query(const InteractionParams& params);
QueryEmbedding make_agent_query(const PerceivedAgent& agent, const InteractionParams& params);
QueryEmbedding make_map_query(const PerceivedMap& map, const InteractionParams& params);

/// [feature | position embedding] of a query.
Eigen::VectorXd decoupled_input(const QueryEmbedding& q);

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct AttentionResult {
  Eigen::VectorXd ego_feature;
  Eigen::VectorXd logits;
  Eigen::VectorXd s_attn;
};

AttentionResult decoupled_attention(const QueryEmbedding& ego, std::span<const QueryEmbedding> objects,
                                    const AttentionHead& head);

/// Interactive score: product of attention, geometric and classification scores.
double fuse_scores(double s_attn, double s_geo, double s_cls);

/// Max distance-map sample over the query's geometry points.
double query_geo_score(const BevGrid& m_d, const QueryEmbedding& q);

struct DualLayerResult {
  QueryEmbedding ego;
  std::vector<QueryEmbedding> objects;
  std::vector<ScoreBreakdown> scores;
};

DualLayerResult dual_interaction_layer(const QueryEmbedding& ego, std::span<const QueryEmbedding> objects,
                                       const BevGrid& m_d, const DualLayerParams& params);

/// Indices of the k largest s_inter values, lower id first on ties, in rank order.
std::vector<std::size_t> top_k_by_score(std::span<const ScoreBreakdown> scores, std::span<const int> ids,
                                        std::size_t k);

struct SelectionTraceEntry {
  int id = 0;
  ScoreBreakdown scores;
  bool kept = false;
};

struct SelectionLayerTrace {
  int layer = 0;
  std::size_t keep = 0;
  std::vector<SelectionTraceEntry> entries;
};

struct BranchResult {
  std::vector<QueryEmbedding> kept;
  Eigen::VectorXd ego_feature;
  std::vector<SelectionLayerTrace> layers;
};

struct SelectionResult {
  BranchResult agents;
  BranchResult maps;
  /// Agent-branch and map-branch ego features, concatenated (2C).
  Eigen::VectorXd ego_feature;
};

/// Keeps the top-K_i objects by interactive score after each layer, lower id
/// first on ties. Agents and maps are filtered in independent branches.
SelectionResult coarse_to_fine_select(const QueryEmbedding& ego, std::vector<QueryEmbedding> agents,
                                      std::vector<QueryEmbedding> maps, const BevGrid& m_d,
                                      const SelectionSchedule& schedule, const InteractionParams& params);

}  // namespace sparseplan
