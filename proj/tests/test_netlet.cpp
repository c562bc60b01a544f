#include <gtest/gtest.h>

#include <cmath>

#include "sparseplan/error.hpp"
#include "sparseplan/netlet.hpp"
#include "sparseplan/rng.hpp"

using namespace sparseplan;
using namespace sparseplan::netlet;

namespace {

GridSpec small_grid() { return GridSpec{-4.0, 4.0, -3.0, 3.0, 0.5}; }

EgoIntent intent(double v, double a, double w, Command c) { return {v, a, w, c}; }

}  // namespace

TEST(Mlp, IdentityLayer) {
  DenseNet net;
  net.layers.push_back(DenseLayer::zeros(3, 3, Activation::Identity));
  net.layers[0].weight.setIdentity();
  const Eigen::VectorXd x(Eigen::Vector3d(1.5, -2.0, 0.25));
  EXPECT_EQ(mlp_forward(net, x), x);
}

TEST(Mlp, ReluOnNegativeIsZero) {
  DenseNet net;
  net.layers.push_back(DenseLayer::zeros(2, 4, Activation::Relu));
  net.layers[0].bias.setConstant(-1.0);
  EXPECT_TRUE(mlp_forward(net, Eigen::VectorXd(Eigen::Vector2d(0.3, 0.7))).isZero(0.0));
}

TEST(Mlp, DeterministicAndShapeChecked) {
  Rng rng(1);
  const DenseNet net = make_mlp<double>({5, 7, 3}, {Activation::Relu, Activation::Sigmoid}, rng);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1, 1);
  EXPECT_EQ(mlp_forward(net, x), mlp_forward(net, x));
  try {
    mlp_forward(net, Eigen::VectorXd(Eigen::VectorXd::Zero(4)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Shape);
  }
}

TEST(Intent, ZeroWeightsGiveZeroFeature) {
  Rng rng(2);
  IntentEncoder enc = make_intent_encoder(16, rng);
  for (auto& n : enc.nets) n = n.zeros_like();
  EXPECT_TRUE(encode_intent(enc, intent(5, 1, 0.2, Command::TurnLeft)).isZero(0.0));
}

TEST(Intent, OutputWidth) {
  for (Eigen::Index c : {16, 64, 256}) {
    Rng rng(3);
    EXPECT_EQ(encode_intent(make_intent_encoder(c, rng), intent(4, 0, 0, Command::KeepForward)).size(), c);
  }
}

TEST(Intent, CommandOnlyTouchesItsRange) {
  Rng rng(4);
  const IntentEncoder enc = make_intent_encoder(16, rng);
  const Eigen::VectorXd a = encode_intent(enc, intent(4, 0.5, 0.1, Command::TurnLeft));
  const Eigen::VectorXd b = encode_intent(enc, intent(4, 0.5, 0.1, Command::TurnRight));
  EXPECT_EQ(a.head(12), b.head(12));
  EXPECT_NE(a.tail(4), b.tail(4));
}

TEST(SE, ZeroInputIsConstant) {
  Rng rng(5);
  SEBlock se = make_se_block<double>(8, 2, rng);
  se.head.bias[0] = 0.3;
  const Eigen::MatrixXd y = se_forward(se, Eigen::MatrixXd(Eigen::MatrixXd::Zero(8, 10)));
  for (Eigen::Index k = 0; k < y.cols(); ++k) EXPECT_DOUBLE_EQ(y(0, k), 1.0 / (1.0 + std::exp(-0.3)));
}

TEST(SE, OutputsInOpenUnitInterval) {
  Rng rng(6);
  const SEBlock se = make_se_block<double>(8, 2, rng);
  Eigen::MatrixXd x(8, 50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0, 2);
  const Eigen::MatrixXd y = se_forward(se, x);
  EXPECT_GT(y.minCoeff(), 0.0);
  EXPECT_LT(y.maxCoeff(), 1.0);
}

TEST(SE, CellPermutationEquivariant) {
  Rng rng(7);
  const SEBlock se = make_se_block<double>(8, 2, rng);
  Eigen::MatrixXd x(8, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0, 1);
  Eigen::MatrixXd swapped = x;
  swapped.col(1).swap(swapped.col(4));
  const Eigen::MatrixXd a = se_forward(se, x), b = se_forward(se, swapped);
  EXPECT_NEAR(a(0, 1), b(0, 4), 1e-15);
  EXPECT_NEAR(a(0, 4), b(0, 1), 1e-15);
  EXPECT_NEAR(a(0, 0), b(0, 0), 1e-15);
}

TEST(GradCheck, LinearNetIsExact) {
  Rng rng(8);
  const DenseNet net = make_mlp<double>({4, 3}, {Activation::Identity}, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -0.5, 1.0);
  const QuadraticLoss loss{Eigen::VectorXd::Constant(3, 0.2)};
  EXPECT_LE(grad_check(net, x, loss), 1e-7);
}

TEST(GradCheck, ReluNetOffKinks) {
  Rng rng(9);
  DenseNet net = make_mlp<double>({5, 8, 3}, {Activation::Relu, Activation::Identity}, rng);
  Eigen::VectorXd x(5);
  for (Eigen::Index i = 0; i < 5; ++i) x[i] = rng.normal(0, 1);
  nudge_off_kinks(net, Eigen::MatrixXd(x), 1e-3);
  const QuadraticLoss loss{Eigen::VectorXd::Constant(3, -0.4)};
  const double e1 = grad_check(net, x, loss);
  EXPECT_LE(e1, 1e-4);
  EXPECT_EQ(e1, grad_check(net, x, loss));
}

TEST(GradCheck, SEBlock) {
  Rng rng(10);
  SEBlock se = make_se_block<double>(8, 2, rng);
  Eigen::MatrixXd x(8, 12);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(0, 1);
  nudge_off_kinks(se.gate, Eigen::MatrixXd(x.rowwise().mean()), 1e-3);
  const QuadraticLoss loss{Eigen::VectorXd::LinSpaced(12, 0.1, 0.9)};
  EXPECT_LE(grad_check(se, x, loss), 1e-4);
}

TEST(GradCheck, Regressor) {
  ResponseRegressor r = make_response_regressor(16, 11);
  const GridSpec g = small_grid();
  const EgoIntent it = intent(5.0, -0.4, 0.15, Command::TurnLeft);
  nudge_off_kinks(r, it, g, 1e-3);
  Eigen::Matrix2Xd pts(2, 6);
  for (int k = 0; k < 6; ++k) pts.col(k) = Vector2(0.6 * (k + 1), 0.1 * k);
  const BevGrid target = response_target(g, Trajectory(pts));
  EXPECT_LE(grad_check(r, it, target, 1.0, 1.0), 1e-4);
}

TEST(Params, FlattenAssignRoundTrip) {
  ResponseRegressor r = make_response_regressor(16, 12);
  const Eigen::VectorXd theta = flatten_params(r);
  EXPECT_EQ(theta.size(), r.parameter_count());
  ResponseRegressor z = r;
  assign_params(z, Eigen::VectorXd::Zero(theta.size()));
  assign_params(z, theta);
  EXPECT_EQ(flatten_params(z), theta);
}

TEST(Loss, HandArithmetic) {
  GridSpec g{0.0, 1.0, 0.0, 1.0, 0.5};
  BevGrid target(g), pred(g);
  target.values << 1.0, 0.8, 0.9, 0.0;
  pred.values.setConstant(0.5);
  const InteractLoss l = interact_loss(pred, target, 1.0, 1.0);
  EXPECT_NEAR(l.l2, 0.1875, 1e-15);
  EXPECT_EQ(l.positives, 2);
  EXPECT_NEAR(l.bce, std::log(2.0), 1e-12);
  EXPECT_NEAR(l.total, l.bce + l.l2, 1e-15);
}

TEST(Loss, IdentityAndPositives) {
  GridSpec g;
  BevGrid a(g);
  a.values.setConstant(0.95);
  const InteractLoss l = interact_loss(a, a, 1.0, 1.0);
  EXPECT_EQ(l.l2, 0.0);
  EXPECT_EQ(l.positives, g.rows() * g.cols());
  BevGrid other(GridSpec{-30, 30, -15, 15, 1.0});
  EXPECT_THROW(interact_loss(a, other, 1, 1), Error);
}

TEST(Loss, NonNegative) {
  Rng rng(13);
  GridSpec g = small_grid();
  BevGrid p(g), t(g);
  for (int trial = 0; trial < 20; ++trial) {
    for (Eigen::Index i = 0; i < p.values.size(); ++i) {
      p.values.data()[i] = rng.uniform();
      t.values.data()[i] = rng.uniform();
    }
    EXPECT_GE(interact_loss(p, t, 1.0, 1.0).total, 0.0);
  }
}

TEST(Train, DescentAndDeterminism) {
  const std::vector<Scenario> one = {gen_scenario("cut_in", 1)};
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.learning_rate = 0.05;
  const GridSpec g = small_grid();
  const TrainResult a = train_response(one, g, cfg);
  const TrainResult b = train_response(one, g, cfg);
  ASSERT_EQ(a.curve.size(), 200u);
  EXPECT_LT(a.curve.back().total, a.curve.front().total);
  for (std::size_t k = 0; k < a.curve.size(); ++k) {
    EXPECT_EQ(a.curve[k].step, static_cast<int>(k));
    EXPECT_EQ(a.curve[k].total, b.curve[k].total);
  }
}

TEST(Train, Errors) {
  EXPECT_THROW(train_response({}, GridSpec{}, TrainConfig{}), Error);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PositionEmbedding, BoundedAndDistinct) {
  const Eigen::VectorXd a = position_embedding({1.0, 2.0}, 16);
  const Eigen::VectorXd b = position_embedding({1.5, 2.0}, 16);
  EXPECT_EQ(a.size(), 16);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT((a - b).norm(), 0.0);
}
