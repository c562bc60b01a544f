#include "sparseplan/netlet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sparseplan::netlet {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view s) {
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::Sigmoid})
    if (to_string(a) == s) return a;
  throw Error(ErrorCode::Parse, "unknown activation '" + std::string(s) + "'");
}

Eigen::VectorXd position_embedding(const Vector2& p, Eigen::Index channels) {
  if (channels < 4 || channels % 4 != 0) throw Error(ErrorCode::Shape, "embedding width must be a multiple of 4");
  const Eigen::Index n = channels / 4;
  Eigen::VectorXd e(channels);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double frac = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 1.0;
    const double wavelength = 4.0 * std::pow(60.0, frac);
    const double w = 2.0 * std::numbers::pi / wavelength;
    e[k] = std::sin(w * p.x());
    e[n + k] = std::cos(w * p.x());
    e[2 * n + k] = std::sin(w * p.y());
    e[3 * n + k] = std::cos(w * p.y());
  }
  return e;
}

Eigen::MatrixXd grid_position_embedding(const GridSpec& spec, Eigen::Index channels) {
  const Eigen::Index rows = spec.rows();
  const Eigen::Index cols = spec.cols();
  Eigen::MatrixXd pe(channels, rows * cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) pe.col(i * cols + j) = position_embedding(spec.center(i, j), channels);
  return pe;
}

std::array<Eigen::VectorXd, 4> intent_inputs(const EgoIntent& intent) {
  Eigen::VectorXd command = Eigen::VectorXd::Zero(3);
  command[static_cast<int>(intent.command)] = 1.0;
  return {Eigen::VectorXd::Constant(1, intent.velocity / 10.0),
          Eigen::VectorXd::Constant(1, intent.acceleration / 3.0),
          Eigen::VectorXd::Constant(1, intent.yaw_rate / 0.5), command};
}

Eigen::Index IntentEncoder::channels() const {
  Eigen::Index c = 0;
  for (const auto& n : nets) c += n.out_dim();
  return c;
}

IntentEncoder make_intent_encoder(Eigen::Index channels, Rng& rng) {
  if (channels < 4 || channels % 4 != 0) throw Error(ErrorCode::Shape, "intent width must be a multiple of 4");
  const Eigen::Index q = channels / 4;
  IntentEncoder enc;
  const std::array<Eigen::Index, 4> in_dims = {1, 1, 1, 3};
  for (std::size_t k = 0; k < 4; ++k)
    enc.nets[k] = make_mlp<double>({in_dims[k], q, q}, {Activation::Relu, Activation::Identity}, rng);
  return enc;
}

Eigen::VectorXd encode_intent(const IntentEncoder& enc, const EgoIntent& intent) {
  const auto inputs = intent_inputs(intent);
  Eigen::VectorXd out(enc.channels());
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const Eigen::VectorXd part = mlp_forward(enc.nets[k], inputs[k]);
    out.segment(off, part.size()) = part;
    off += part.size();
  }
  return out;
}

Eigen::Index ResponseRegressor::parameter_count() const {
  Eigen::Index n = projection.parameter_count() + se.parameter_count();
  for (const auto& net : intent.nets) n += net.parameter_count();
  return n;
}

ResponseRegressor make_response_regressor(Eigen::Index channels, std::uint64_t seed, Eigen::Index reduction) {
  Rng rng(derive_seed(seed, "init"));
  ResponseRegressor r;
  r.intent = make_intent_encoder(channels, rng);
  r.projection = make_mlp<double>({2 * channels, channels}, {Activation::Relu}, rng).layers.front();
  r.se = make_se_block<double>(channels, reduction, rng);
  return r;
}

Eigen::VectorXd flatten_params(const ResponseRegressor& r) {
  std::vector<double> v;
  for (const auto& net : r.intent.nets) append_params(net, v);
  append_params(DenseNet{{r.projection}}, v);
  append_params(r.se.gate, v);
  append_params(DenseNet{{r.se.head}}, v);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void assign_params(ResponseRegressor& r, const Eigen::VectorXd& flat) {
  std::size_t off = 0;
  for (auto& net : r.intent.nets) off = assign_params(net, flat, off);
  DenseNet proj{{r.projection}};
  off = assign_params(proj, flat, off);
  r.projection = proj.layers.front();
  off = assign_params(r.se.gate, flat, off);
  DenseNet head{{r.se.head}};
  off = assign_params(head, flat, off);
  r.se.head = head.layers.front();
  if (off != static_cast<std::size_t>(flat.size())) throw Error(ErrorCode::Shape, "parameter vector length mismatch");
}

namespace {

struct RegressorGrads {
  std::array<DenseNet, 4> intent;
  DenseLayer projection;
  SEBlock se;

  explicit RegressorGrads(const ResponseRegressor& r) {
    for (std::size_t k = 0; k < 4; ++k) intent[k] = r.intent.nets[k].zeros_like();
    projection = DenseLayer::zeros(r.projection.in_dim(), r.projection.out_dim(), r.projection.activation);
    se = zeros_like(r.se);
  }

  Eigen::VectorXd flatten() const {
    ResponseRegressor tmp;
    tmp.intent.nets = intent;
    tmp.projection = projection;
    tmp.se = se;
    return flatten_params(tmp);
  }
};

/// Cell-independent part of the projection: W_pos * PE + b.
Eigen::MatrixXd projected_positions(const ResponseRegressor& r, const Eigen::MatrixXd& pos_embed) {
  const Eigen::Index c = r.channels();
  if (pos_embed.rows() != c) throw Error(ErrorCode::Shape, "position embedding width mismatch");
  return (r.projection.weight.rightCols(c) * pos_embed).colwise() + r.projection.bias;
}

struct IntentForward {
  std::array<ForwardCache<double>, 4> caches;
  Eigen::VectorXd feature;
};

IntentForward intent_forward(const IntentEncoder& enc, const EgoIntent& intent) {
  IntentForward f;
  const auto inputs = intent_inputs(intent);
  f.feature.resize(enc.channels());
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const Eigen::MatrixXd out = forward(enc.nets[k], Eigen::MatrixXd(inputs[k]), &f.caches[k]);
    f.feature.segment(off, out.rows()) = out.col(0);
    off += out.rows();
  }
  return f;
}

Eigen::MatrixXd regressor_logits(const ResponseRegressor& r, const IntentForward& intent_fwd,
                                 const Eigen::MatrixXd& proj_pos, Eigen::MatrixXd* pre_out, SECache<double>* se_cache) {
  const Eigen::Index c = r.channels();
  Eigen::MatrixXd pre = proj_pos.colwise() + r.projection.weight.leftCols(c) * intent_fwd.feature;
  const Eigen::MatrixXd features = pre.cwiseMax(0.0);
  SECache<double> local;
  SECache<double>* cache = se_cache ? se_cache : &local;
  se_forward(r.se, features, cache);
  if (pre_out) *pre_out = std::move(pre);
  return cache->logits;
}

/// Per-cell loss terms from a logit; one exp serves both sigmoid and softplus.
struct CellLoss {
  double p;
  double softplus;
};

CellLoss cell_loss(double z) {
  const double e = std::exp(-std::abs(z));
  const double p = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return {p, std::max(z, 0.0) + std::log1p(e)};
}

/// Loss from logits and its derivative with respect to each logit.
InteractLoss loss_from_logits(const Eigen::MatrixXd& logits, const Eigen::VectorXd& target, double w_bce,
                              double w_l2, Eigen::MatrixXd* dlogits) {
  const Eigen::Index n = logits.cols();
  InteractLoss out;
  if (dlogits) dlogits->resize(1, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double z = logits(0, k);
    const CellLoss cl = cell_loss(z);
    const double p = cl.p;
    const double t = target[k];
    const double y = t >= kPositiveScore ? 1.0 : 0.0;
    if (y > 0.0) ++out.positives;
    out.bce += cl.softplus - y * z;
    out.l2 += (p - t) * (p - t);
    if (dlogits) (*dlogits)(0, k) = inv_n * (w_bce * (p - y) + w_l2 * 2.0 * (p - t) * p * (1.0 - p));
  }
  out.bce *= inv_n;
  out.l2 *= inv_n;
  out.total = w_bce * out.bce + w_l2 * out.l2;
  return out;
}

Eigen::VectorXd row_major(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return v;
}

/// Forward + backward for one sample, fused per cell so no C x N temporaries
/// are built. Accumulates all gradients except the position half of the
/// projection; d(loss)/d(pre) for that half is added into `dpre_total`.
InteractLoss sample_backward(const ResponseRegressor& r, const EgoIntent& intent, const Eigen::VectorXd& target,
                             const Eigen::MatrixXd& proj_pos, double w_bce, double w_l2, RegressorGrads& grads,
                             Eigen::MatrixXd& dpre_total) {
  const Eigen::Index c = r.channels();
  const Eigen::Index n = proj_pos.cols();
  if (target.size() != n) throw Error(ErrorCode::Shape, "target size does not match the grid");
  const IntentForward fwd = intent_forward(r.intent, intent);
  const Eigen::VectorXd bias = r.projection.weight.leftCols(c) * fwd.feature;
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::VectorXd f(c);
  Eigen::VectorXd squeezed = Eigen::VectorXd::Zero(c);
  for (Eigen::Index k = 0; k < n; ++k) squeezed += (proj_pos.col(k) + bias).cwiseMax(0.0);
  squeezed *= inv_n;
  ForwardCache<double> gate_cache;
  const Eigen::VectorXd g = forward(r.se.gate, Eigen::MatrixXd(squeezed), &gate_cache).col(0);
  const Eigen::VectorXd head_w = r.se.head.weight.row(0).transpose();
  const Eigen::VectorXd head_wg = head_w.cwiseProduct(g);
  const double head_b = r.se.head.bias[0];

  InteractLoss loss;
  Eigen::VectorXd dlogit(n);
  Eigen::VectorXd dgate = Eigen::VectorXd::Zero(c);
  Eigen::VectorXd dhead = Eigen::VectorXd::Zero(c);
  double dhead_b = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    f.noalias() = (proj_pos.col(k) + bias).cwiseMax(0.0);
    const double z = head_wg.dot(f) + head_b;
    const CellLoss cl = cell_loss(z);
    const double p = cl.p;
    const double t = target[k];
    const double y = t >= kPositiveScore ? 1.0 : 0.0;
    if (y > 0.0) ++loss.positives;
    loss.bce += cl.softplus - y * z;
    loss.l2 += (p - t) * (p - t);
    const double dl = inv_n * (w_bce * (p - y) + w_l2 * 2.0 * (p - t) * p * (1.0 - p));
    dlogit[k] = dl;
    dhead.noalias() += dl * f;
    dhead_b += dl;
  }
  loss.bce *= inv_n;
  loss.l2 *= inv_n;
  loss.total = w_bce * loss.bce + w_l2 * loss.l2;

  // d/d(gate) sums head_w * f_k * dl_k over cells; d/d(head) needs f_k * g.
  for (Eigen::Index k = 0; k < n; ++k) dgate.noalias() += dlogit[k] * (proj_pos.col(k) + bias).cwiseMax(0.0);
  dgate = dgate.cwiseProduct(head_w);
  grads.se.head.weight.row(0) += dhead.cwiseProduct(g).transpose();
  grads.se.head.bias[0] += dhead_b;
  const Eigen::VectorXd dsq =
      backward(r.se.gate, gate_cache, Eigen::MatrixXd(dgate), grads.se.gate).col(0) * inv_n;

  Eigen::VectorXd dpre_sum = Eigen::VectorXd::Zero(c);
  for (Eigen::Index k = 0; k < n; ++k) {
    f.noalias() = proj_pos.col(k) + bias;
    auto d = dpre_total.col(k);
    for (Eigen::Index i = 0; i < c; ++i) {
      if (f[i] <= 0.0) continue;
      const double v = dlogit[k] * head_wg[i] + dsq[i];
      d[i] += v;
      dpre_sum[i] += v;
    }
  }
  grads.projection.weight.leftCols(c).noalias() += dpre_sum * fwd.feature.transpose();
  const Eigen::VectorXd dintent = r.projection.weight.leftCols(c).transpose() * dpre_sum;
  Eigen::Index off = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const Eigen::Index q = r.intent.nets[k].out_dim();
    backward(r.intent.nets[k], fwd.caches[k], Eigen::MatrixXd(dintent.segment(off, q)), grads.intent[k]);
    off += q;
  }
  return loss;
}

void finish_projection_grads(RegressorGrads& grads, const Eigen::MatrixXd& dpre_total, const Eigen::MatrixXd& pos_embed) {
  const Eigen::Index c = grads.projection.out_dim();
  grads.projection.weight.rightCols(c).noalias() += dpre_total * pos_embed.transpose();
  grads.projection.bias += dpre_total.rowwise().sum();
}

}  // namespace

BevGrid predict_response(const ResponseRegressor& r, const EgoIntent& intent, const GridSpec& spec) {
  const Eigen::MatrixXd pe = grid_position_embedding(spec, r.channels());
  const Eigen::MatrixXd logits = regressor_logits(r, intent_forward(r.intent, intent), projected_positions(r, pe), nullptr, nullptr);
  BevGrid g(spec);
  const Eigen::Index cols = spec.cols();
  for (Eigen::Index i = 0; i < g.values.rows(); ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g.values(i, j) = sigmoid(logits(0, i * cols + j));
  return g;
}

InteractLoss interact_loss(const BevGrid& pred, const BevGrid& target, double w_bce, double w_l2) {
  if (!(pred.spec == target.spec) || pred.values.rows() != target.values.rows() ||
      pred.values.cols() != target.values.cols()) {
    throw Error(ErrorCode::Shape, "prediction and target grids differ");
  }
  InteractLoss out;
  const auto n = static_cast<double>(pred.values.size());
  for (Eigen::Index i = 0; i < pred.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.values.cols(); ++j) {
      const double p = std::clamp(pred.values(i, j), 1e-12, 1.0 - 1e-12);
      const double t = target.values(i, j);
      const bool positive = t >= kPositiveScore;
      if (positive) ++out.positives;
      out.bce -= positive ? std::log(p) : std::log(1.0 - p);
      const double e = pred.values(i, j) - t;
      out.l2 += e * e;
    }
  }
  out.bce /= n;
  out.l2 /= n;
  out.total = w_bce * out.bce + w_l2 * out.l2;
  return out;
}

InteractLoss regressor_loss_and_gradient(const ResponseRegressor& r, const EgoIntent& intent, const BevGrid& target,
                                         const Eigen::MatrixXd& pos_embed, double w_bce, double w_l2,
                                         Eigen::VectorXd* gradient) {
  const Eigen::MatrixXd proj_pos = projected_positions(r, pos_embed);
  const Eigen::VectorXd t = row_major(target.values);
  if (!gradient) {
    const auto logits = regressor_logits(r, intent_forward(r.intent, intent), proj_pos, nullptr, nullptr);
    return loss_from_logits(logits, t, w_bce, w_l2, nullptr);
  }
  RegressorGrads grads(r);
  Eigen::MatrixXd dpre = Eigen::MatrixXd::Zero(r.channels(), proj_pos.cols());
  const InteractLoss loss = sample_backward(r, intent, t, proj_pos, w_bce, w_l2, grads, dpre);
  finish_projection_grads(grads, dpre, pos_embed);
  *gradient = grads.flatten();
  return loss;
}

// ---------------------------------------------------------------------------

double grad_check(const DenseNet& net, const Eigen::VectorXd& input, const QuadraticLoss& loss, double eps) {
  ForwardCache<double> cache;
  const Eigen::MatrixXd y = forward(net, Eigen::MatrixXd(input), &cache);
  if (y.rows() != loss.target.size()) throw Error(ErrorCode::Shape, "loss target length mismatch");
  DenseNet grads = net.zeros_like();
  backward(net, cache, Eigen::MatrixXd(y.col(0) - loss.target), grads);
  auto value = [&](const DenseNet& n) { return 0.5 * (mlp_forward(n, input) - loss.target).squaredNorm(); };
  return grad_check_generic(net, value, flatten_params(grads), eps);
}

double grad_check(const SEBlock& block, const Eigen::MatrixXd& features, const QuadraticLoss& loss, double eps) {
  SECache<double> cache;
  const Eigen::MatrixXd y = se_forward(block, features, &cache);
  if (y.cols() != loss.target.size()) throw Error(ErrorCode::Shape, "loss target length mismatch");
  const Eigen::ArrayXd p = y.row(0).transpose().array();
  const Eigen::MatrixXd dlogits = ((p - loss.target.array()) * p * (1.0 - p)).matrix().transpose();
  SEBlock grads = zeros_like(block);
  se_backward_from_logits(block, cache, dlogits, grads);
  auto value = [&](const SEBlock& b) {
    return 0.5 * (se_forward(b, features).row(0).transpose() - loss.target).squaredNorm();
  };
  return grad_check_generic(block, value, flatten_params(grads), eps);
}

double grad_check(const ResponseRegressor& r, const EgoIntent& intent, const BevGrid& target, double w_bce,
                  double w_l2, double eps) {
  const Eigen::MatrixXd pe = grid_position_embedding(target.spec, r.channels());
  Eigen::VectorXd grad;
  regressor_loss_and_gradient(r, intent, target, pe, w_bce, w_l2, &grad);
  auto value = [&](const ResponseRegressor& m) {
    return regressor_loss_and_gradient(m, intent, target, pe, w_bce, w_l2, nullptr).total;
  };
  return grad_check_generic(r, value, grad, eps);
}

void nudge_off_kinks(DenseNet& net, const Eigen::MatrixXd& input, double margin) {
  Eigen::MatrixXd h = input;
  for (auto& layer : net.layers) {
    Eigen::MatrixXd pre = (layer.weight * h).colwise() + layer.bias;
    if (layer.activation == Activation::Relu) {
      for (Eigen::Index r = 0; r < pre.rows(); ++r) {
        // Smallest bias shift that moves every sample of this unit off the kink band.
        for (int attempt = 0; attempt < 64; ++attempt) {
          const double closest = pre.row(r).cwiseAbs().minCoeff();
          if (closest >= margin) break;
          layer.bias[r] += 2.0 * margin;
          pre.row(r).array() += 2.0 * margin;
        }
      }
    }
    h = activate(pre, layer.activation);
  }
}

void nudge_off_kinks(ResponseRegressor& r, const EgoIntent& intent, const GridSpec& spec, double margin) {
  const auto inputs = intent_inputs(intent);
  for (std::size_t k = 0; k < 4; ++k) nudge_off_kinks(r.intent.nets[k], Eigen::MatrixXd(inputs[k]), margin);
  const Eigen::Index c = r.channels();
  const Eigen::MatrixXd pe = grid_position_embedding(spec, c);
  Eigen::MatrixXd input(2 * c, pe.cols());
  input.topRows(c) = encode_intent(r.intent, intent).replicate(1, pe.cols());
  input.bottomRows(c) = pe;
  DenseNet proj{{r.projection}};
  nudge_off_kinks(proj, input, margin);
  r.projection = proj.layers.front();
  const Eigen::MatrixXd features = forward(proj, input);
  nudge_off_kinks(r.se.gate, Eigen::MatrixXd(features.rowwise().mean()), margin);
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::Domain, "learning rate must be positive");
  if (steps < 1) throw Error(ErrorCode::Domain, "step count must be at least 1");
  if (batch_size < 0) throw Error(ErrorCode::Domain, "batch size must be non-negative");
}

TrainResult train_response(const std::vector<Scenario>& scenarios, const GridSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  if (scenarios.empty()) throw Error(ErrorCode::EmptyInput, "no training scenarios");
  spec.validate();

  TrainResult result{make_response_regressor(cfg.channels, cfg.seed), {}};
  ResponseRegressor& model = result.model;
  const Eigen::MatrixXd pe = grid_position_embedding(spec, cfg.channels);
  std::vector<Eigen::VectorXd> targets;
  targets.reserve(scenarios.size());
  for (const auto& s : scenarios) targets.push_back(row_major(response_target(spec, s.ego_gt_future).values));

  const std::size_t n = scenarios.size();
  const std::size_t batch = cfg.batch_size <= 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(cfg.batch_size));
  Eigen::VectorXd theta = flatten_params(model);
  std::size_t cursor = 0;
  Eigen::MatrixXd dpre_total(model.channels(), pe.cols());
  for (int step = 0; step < cfg.steps; ++step) {
    const Eigen::MatrixXd proj_pos = projected_positions(model, pe);
    RegressorGrads grads(model);
    dpre_total.setZero();
    LossSample sample{step, 0.0, 0.0, 0.0};
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t k = (cursor + b) % n;
      const InteractLoss l =
          sample_backward(model, scenarios[k].ego_intent, targets[k], proj_pos, cfg.w_bce, cfg.w_l2, grads, dpre_total);
      sample.bce += l.bce;
      sample.l2 += l.l2;
      sample.total += l.total;
    }
    cursor = (cursor + batch) % n;
    finish_projection_grads(grads, dpre_total, pe);
    const double inv = 1.0 / static_cast<double>(batch);
    sample.bce *= inv;
    sample.l2 *= inv;
    sample.total *= inv;
    result.curve.push_back(sample);
    theta -= cfg.learning_rate * inv * grads.flatten();
    assign_params(model, theta);
  }
  return result;
}

InteractLoss evaluate_response(const ResponseRegressor& r, const std::vector<Scenario>& scenarios, const GridSpec& spec,
                               double w_bce, double w_l2) {
  if (scenarios.empty()) throw Error(ErrorCode::EmptyInput, "no evaluation scenarios");
  const Eigen::MatrixXd pe = grid_position_embedding(spec, r.channels());
  InteractLoss mean;
  for (const auto& s : scenarios) {
    const InteractLoss l =
        regressor_loss_and_gradient(r, s.ego_intent, response_target(spec, s.ego_gt_future), pe, w_bce, w_l2, nullptr);
    mean.bce += l.bce;
    mean.l2 += l.l2;
    mean.total += l.total;
    mean.positives += l.positives;
  }
  const double inv = 1.0 / static_cast<double>(scenarios.size());
  mean.bce *= inv;
  mean.l2 *= inv;
  mean.total *= inv;
  return mean;
}

}  // namespace sparseplan::netlet
