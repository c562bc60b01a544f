#pragma once

#include <type_traits>

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "sparseplan/bevgrid.hpp"
#include "sparseplan/error.hpp"
#include "sparseplan/rng.hpp"
#include "sparseplan/scene.hpp"

namespace sparseplan::netlet {

enum class Activation { Identity, Relu, Sigmoid };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-z).exp()).inverse();
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar sigmoid(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

template <typename Scalar>
struct BasicDenseLayer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  Eigen::Index parameter_count() const { return weight.size() + bias.size(); }

  static BasicDenseLayer zeros(Eigen::Index in, Eigen::Index out, Activation act) {
    return {MatrixX<Scalar>::Zero(out, in), VectorX<Scalar>::Zero(out), act};
  }
};

template <typename Scalar>
MatrixX<Scalar> activate(const MatrixX<Scalar>& pre, Activation act) {
  switch (act) {
    case Activation::Relu: return pre.cwiseMax(Scalar(0));
    case Activation::Sigmoid: return sigmoid(pre.array()).matrix();
    case Activation::Identity: break;
  }
  return pre;
}

/// d(activation)/d(pre) applied to an upstream gradient.
template <typename Scalar>
MatrixX<Scalar> activation_backward(const MatrixX<Scalar>& pre, const MatrixX<Scalar>& out,
                                    const MatrixX<Scalar>& upstream, Activation act) {
  switch (act) {
    case Activation::Relu: return (pre.array() > Scalar(0)).select(upstream, Scalar(0));
    case Activation::Sigmoid: return (upstream.array() * out.array() * (Scalar(1) - out.array())).matrix();
    case Activation::Identity: break;
  }
  return upstream;
}

/// Feed-forward stack of dense layers. Inputs are column batches (in x N).
template <typename Scalar>
struct BasicDenseNet {
  std::vector<BasicDenseLayer<Scalar>> layers;

  Eigen::Index in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }

  /// Same architecture, all parameters zero.
  BasicDenseNet zeros_like() const {
    BasicDenseNet z;
    for (const auto& l : layers) z.layers.push_back(BasicDenseLayer<Scalar>::zeros(l.in_dim(), l.out_dim(), l.activation));
    return z;
  }

  /// Throws a shape error unless consecutive layer dimensions chain.
  void validate() const {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      if (layers[k].bias.size() != layers[k].out_dim()) throw Error(ErrorCode::Shape, "bias size mismatch");
      if (k > 0 && layers[k].in_dim() != layers[k - 1].out_dim())
        throw Error(ErrorCode::Shape, "layer dimensions do not chain");
    }
  }
};

template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> inputs;
  std::vector<MatrixX<Scalar>> pre;
  std::vector<MatrixX<Scalar>> outputs;
};

template <typename Scalar>
MatrixX<Scalar> forward(const BasicDenseNet<Scalar>& net, const MatrixX<Scalar>& x,
                        ForwardCache<Scalar>* cache = nullptr) {
  if (net.layers.empty()) return x;
  if (x.rows() != net.in_dim()) throw Error(ErrorCode::Shape, "input length does not match network");
  MatrixX<Scalar> h = x;
  if (cache) *cache = {};
  for (const auto& layer : net.layers) {
    MatrixX<Scalar> pre = (layer.weight * h).colwise() + layer.bias;
    MatrixX<Scalar> out = activate(pre, layer.activation);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
      cache->outputs.push_back(out);
    }
    h = std::move(out);
  }
  return h;
}

/// Backpropagates `upstream` (out x N); accumulates parameter gradients into
/// `grads` (same architecture) and returns d(loss)/d(input).
template <typename Scalar>
MatrixX<Scalar> backward(const BasicDenseNet<Scalar>& net, const ForwardCache<Scalar>& cache,
                         const MatrixX<Scalar>& upstream, BasicDenseNet<Scalar>& grads) {
  MatrixX<Scalar> g = upstream;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& layer = net.layers[k];
    const MatrixX<Scalar> dpre = activation_backward(cache.pre[k], cache.outputs[k], g, layer.activation);
    grads.layers[k].weight.noalias() += dpre * cache.inputs[k].transpose();
    grads.layers[k].bias += dpre.rowwise().sum();
    g = layer.weight.transpose() * dpre;
  }
  return g;
}

template <typename Scalar>
VectorX<Scalar> mlp_forward(const BasicDenseNet<Scalar>& net, const VectorX<Scalar>& input) {
  return forward(net, MatrixX<Scalar>(input)).col(0);
}

/// Glorot-uniform weights, zero biases.
template <typename Scalar>
BasicDenseNet<Scalar> make_mlp(const std::vector<Eigen::Index>& dims, const std::vector<Activation>& acts,
                               Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1) throw Error(ErrorCode::Shape, "bad MLP layout");
  BasicDenseNet<Scalar> net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    auto layer = BasicDenseLayer<Scalar>::zeros(dims[k], dims[k + 1], acts[k]);
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        layer.weight(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// Parameter flattening order: per layer, weight row-major then bias.

template <typename Scalar>
void append_params(const BasicDenseNet<Scalar>& net, std::vector<Scalar>& out) {
  for (const auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias[r]);
  }
}

template <typename Scalar>
std::size_t assign_params(BasicDenseNet<Scalar>& net, const VectorX<Scalar>& flat, std::size_t offset) {
  for (auto& l : net.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[static_cast<Eigen::Index>(offset++)];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[static_cast<Eigen::Index>(offset++)];
  }
  return offset;
}

template <typename Scalar>
VectorX<Scalar> flatten_params(const BasicDenseNet<Scalar>& net) {
  std::vector<Scalar> v;
  append_params(net, v);
  return Eigen::Map<const VectorX<Scalar>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename Scalar>
void assign_params(BasicDenseNet<Scalar>& net, const VectorX<Scalar>& flat) {
  if (assign_params(net, flat, 0) != static_cast<std::size_t>(flat.size()))
    throw Error(ErrorCode::Shape, "parameter vector length mismatch");
}

/// Squeeze-and-excitation block followed by a one-channel sigmoid head.
/// Input is a C x N feature map (one column per cell).
template <typename Scalar>
struct BasicSEBlock {
  BasicDenseNet<Scalar> gate;  // C -> C/r (relu) -> C (sigmoid)
  BasicDenseLayer<Scalar> head = BasicDenseLayer<Scalar>::zeros(0, 1, Activation::Sigmoid);  // C -> 1

  Eigen::Index channels() const { return gate.in_dim(); }
  Eigen::Index parameter_count() const { return gate.parameter_count() + head.parameter_count(); }
};

template <typename Scalar>
BasicSEBlock<Scalar> make_se_block(Eigen::Index channels, Eigen::Index reduction, Rng& rng) {
  BasicSEBlock<Scalar> b;
  const Eigen::Index hidden = std::max<Eigen::Index>(1, channels / reduction);
  b.gate = make_mlp<Scalar>({channels, hidden, channels}, {Activation::Relu, Activation::Sigmoid}, rng);
  b.head = make_mlp<Scalar>({channels, 1}, {Activation::Sigmoid}, rng).layers.front();
  return b;
}

template <typename Scalar>
struct SECache {
  MatrixX<Scalar> input;
  ForwardCache<Scalar> gate;
  VectorX<Scalar> gate_out;
  MatrixX<Scalar> gated;
  MatrixX<Scalar> logits;  // 1 x N
  MatrixX<Scalar> output;  // 1 x N
};

template <typename Scalar>
MatrixX<Scalar> se_forward(const BasicSEBlock<Scalar>& block, const MatrixX<Scalar>& features,
                           SECache<Scalar>* cache = nullptr) {
  if (features.rows() != block.channels() || features.cols() == 0)
    throw Error(ErrorCode::Shape, "feature map channels do not match SE block");
  ForwardCache<Scalar> gc;
  const MatrixX<Scalar> squeezed = features.rowwise().mean();
  const VectorX<Scalar> g = forward(block.gate, squeezed, cache ? &gc : nullptr).col(0);
  MatrixX<Scalar> gated = features.array().colwise() * g.array();
  MatrixX<Scalar> logits = (block.head.weight * gated).array() + block.head.bias[0];
  MatrixX<Scalar> out = sigmoid(logits.array()).matrix();
  if (cache) {
    cache->input = features;
    cache->gate = std::move(gc);
    cache->gate_out = g;
    cache->gated = std::move(gated);
    cache->logits = std::move(logits);
    cache->output = out;
  }
  return out;
}

/// Backward pass from d(loss)/d(logits) (1 x N); returns d(loss)/d(features).
template <typename Scalar>
MatrixX<Scalar> se_backward_from_logits(const BasicSEBlock<Scalar>& block, const SECache<Scalar>& cache,
                                        const MatrixX<Scalar>& dlogits, BasicSEBlock<Scalar>& grads) {
  grads.head.weight.noalias() += dlogits * cache.gated.transpose();
  grads.head.bias[0] += dlogits.sum();
  const MatrixX<Scalar> dgated = block.head.weight.transpose() * dlogits;  // C x N
  MatrixX<Scalar> dfeatures = dgated.array().colwise() * cache.gate_out.array();
  const VectorX<Scalar> dgate = (dgated.array() * cache.input.array()).rowwise().sum();
  const MatrixX<Scalar> dsqueezed = backward(block.gate, cache.gate, MatrixX<Scalar>(dgate), grads.gate);
  dfeatures.colwise() += dsqueezed.col(0) / static_cast<Scalar>(cache.input.cols());
  return dfeatures;
}

template <typename Scalar>
BasicSEBlock<Scalar> zeros_like(const BasicSEBlock<Scalar>& b) {
  BasicSEBlock<Scalar> z;
  z.gate = b.gate.zeros_like();
  z.head = BasicDenseLayer<Scalar>::zeros(b.head.in_dim(), 1, b.head.activation);
  return z;
}

template <typename Scalar>
VectorX<Scalar> flatten_params(const BasicSEBlock<Scalar>& b) {
  std::vector<Scalar> v;
  append_params(b.gate, v);
  BasicDenseNet<Scalar> head_net{{b.head}};
  append_params(head_net, v);
  return Eigen::Map<const VectorX<Scalar>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename Scalar>
void assign_params(BasicSEBlock<Scalar>& b, const VectorX<Scalar>& flat) {
  std::size_t off = assign_params(b.gate, flat, 0);
  BasicDenseNet<Scalar> head_net{{b.head}};
  off = assign_params(head_net, flat, off);
  b.head = head_net.layers.front();
  if (off != static_cast<std::size_t>(flat.size())) throw Error(ErrorCode::Shape, "parameter vector length mismatch");
}

using DenseLayer = BasicDenseLayer<double>;
using DenseNet = BasicDenseNet<double>;
using SEBlock = BasicSEBlock<double>;

// ---------------------------------------------------------------------------

/// 2-D sinusoidal embedding of a BEV position, width `channels` (multiple of 4).
/// Wavelengths span 4 m to 240 m geometrically, per axis.
Eigen::VectorXd position_embedding(const Vector2& p, Eigen::Index channels);

/// Position embeddings of every cell center, C x (H*W), row-major cell order.
Eigen::MatrixXd grid_position_embedding(const GridSpec& spec, Eigen::Index channels);

/// Raw inputs of the four intent encoders (velocity, acceleration, yaw rate, command).
std::array<Eigen::VectorXd, 4> intent_inputs(const EgoIntent& intent);

/// Four MLPs, each emitting C/4 features.
struct IntentEncoder {
  std::array<DenseNet, 4> nets;

  Eigen::Index channels() const;
};

IntentEncoder make_intent_encoder(Eigen::Index channels, Rng& rng);

Eigen::VectorXd encode_intent(const IntentEncoder& enc, const EgoIntent& intent);

/// Response-map regressor: intent features and cell position embeddings are
/// concatenated, projected to C with a relu, then fed to a single SE block.
struct ResponseRegressor {
  IntentEncoder intent;
  DenseLayer projection;  // 2C -> C, relu
  SEBlock se;

  Eigen::Index channels() const { return projection.out_dim(); }
  Eigen::Index parameter_count() const;
};

ResponseRegressor make_response_regressor(Eigen::Index channels, std::uint64_t seed, Eigen::Index reduction = 2);

Eigen::VectorXd flatten_params(const ResponseRegressor& r);
void assign_params(ResponseRegressor& r, const Eigen::VectorXd& flat);

/// Predicted response map M_r for an intent.
BevGrid predict_response(const ResponseRegressor& r, const EgoIntent& intent, const GridSpec& spec);

struct InteractLoss {
  double bce = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  Eigen::Index positives = 0;
};

inline constexpr double kPositiveScore = 0.9;

/// Binary cross-entropy on labels (target >= 0.9) plus mean squared error.
InteractLoss interact_loss(const BevGrid& pred, const BevGrid& target, double w_bce, double w_l2);

/// Loss and flattened parameter gradient of the regressor for one target map.
/// `pos_embed` must be grid_position_embedding(target.spec, C).
InteractLoss regressor_loss_and_gradient(const ResponseRegressor& r, const EgoIntent& intent,
                                         const BevGrid& target, const Eigen::MatrixXd& pos_embed,
                                         double w_bce, double w_l2, Eigen::VectorXd* gradient);

// ---------------------------------------------------------------------------
// Gradient verification

/// 0.5 * ||y - target||^2
struct QuadraticLoss {
  Eigen::VectorXd target;
};

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
/// with the numeric gradient from central differences.
template <typename Model, typename LossFn>
double grad_check_generic(const Model& model, LossFn&& loss, const Eigen::VectorXd& analytic, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::Domain, "finite-difference step must be positive");
  const Eigen::VectorXd theta = flatten_params(model);
  if (theta.size() != analytic.size()) throw Error(ErrorCode::Shape, "gradient length mismatch");
  Model probe = model;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] = theta[i] + eps;
    assign_params(probe, t);
    const double up = loss(probe);
    t[i] = theta[i] - eps;
    assign_params(probe, t);
    const double down = loss(probe);
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double grad_check(const DenseNet& net, const Eigen::VectorXd& input, const QuadraticLoss& loss, double eps = 1e-5);
double grad_check(const SEBlock& block, const Eigen::MatrixXd& features, const QuadraticLoss& loss,
                  double eps = 1e-5);
double grad_check(const ResponseRegressor& r, const EgoIntent& intent, const BevGrid& target, double w_bce,
                  double w_l2, double eps = 1e-5);

/// Shifts biases so every relu pre-activation on `input` is at least `margin`
/// away from zero; finite differences are then valid.
void nudge_off_kinks(DenseNet& net, const Eigen::MatrixXd& input, double margin);
void nudge_off_kinks(ResponseRegressor& r, const EgoIntent& intent, const GridSpec& spec, double margin);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 0.05;
  int steps = 200;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  // hard-label bce at weight 1 drags soft targets (0.3..0.9) to 0, so it stays a light term
  double w_bce = 0.1;
  double w_l2 = 1.0;
  Eigen::Index channels = 16;

  void validate() const;
};

struct LossSample {
  int step = 0;
  double bce = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct TrainResult {
  ResponseRegressor model;
  std::vector<LossSample> curve;
};

/// Plain gradient descent on the interaction loss against response_target maps
/// of the scenarios' ego futures. Batches cycle through the scenarios in order.
TrainResult train_response(const std::vector<Scenario>& scenarios, const GridSpec& spec, const TrainConfig& cfg);

/// Mean interaction loss of a model over scenarios.
InteractLoss evaluate_response(const ResponseRegressor& r, const std::vector<Scenario>& scenarios,
                               const GridSpec& spec, double w_bce, double w_l2);

}  // namespace sparseplan::netlet
