#include <cmath>

#include "doctest.h"
#include "dappr/datasets.hpp"
#include "dappr/error.hpp"
#include "dappr/nn.hpp"
#include "dappr/verify.hpp"
#include "oracles.hpp"

using namespace dappr;

namespace {

TrainConfig blob_config(LossKind kind, std::uint64_t seed) {
  TrainConfig c;
  c.layer_sizes = {2, 32, 32, 2};
  c.epochs = 50;
  c.seed = seed;
  c.loss_kind = kind;
  return c;
}

DatasetSplits two_blobs() { return split(gaussian_blobs(2, 200, 2, 1.0, 3), SplitSpec{0.8, 0.1, 0.1, 3}); }

// Frozen-target DAPPr or cross-entropy objective, written in long double.
double objective(LossKind kind, const Eigen::MatrixXd& z, const std::vector<int>& y, const Eigen::MatrixXd& target,
                 double lambda) {
  oracle::ld total = 0;
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    if (kind == LossKind::cross_entropy) {
      oracle::ld s = 0;
      for (Eigen::Index k = 0; k < z.cols(); ++k) s += std::exp(static_cast<oracle::ld>(z(b, k)));
      total += std::log(s) - z(b, y[b]);
      continue;
    }
    oracle::ld a0 = 0;
    for (Eigen::Index k = 0; k < z.cols(); ++k) a0 += oracle::softplus(z(b, k)) + 1;
    oracle::ld v = a0 * std::log(a0);
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const oracle::ld a = oracle::softplus(z(b, k)) + 1;
      v += a * std::log(target(b, k) / a);
      if (k != y[b]) v += lambda * a * a;
    }
    total += v;
  }
  return static_cast<double>(total / z.rows());
}

}  // namespace

TEST_CASE("initialisation is deterministic and shaped") {
  TrainConfig c;
  c.layer_sizes = {2, 16, 3};
  c.seed = 9;
  const auto a = init_network(c), b = init_network(c);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].weight.rows() == 16);
  CHECK(a.layers[0].weight.cols() == 2);
  CHECK(a.layers[1].weight.rows() == 3);
  CHECK(a.layers[1].bias.size() == 3);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].bias.isZero());
    CHECK(a.layers[l].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / c.layer_sizes[l]));
  }
  c.seed = 10;
  CHECK(init_network(c).layers[0].weight != a.layers[0].weight);
}

TEST_CASE("fresh head gives near-uniform concentrations on centred inputs") {
  TrainConfig c;
  c.layer_sizes = {2, 32, 32, 3};
  c.seed = 4;
  const auto params = init_network(c);
  oracle::Gen gen(31);
  Eigen::MatrixXd x(200, 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) x.row(r) << gen.real(-1, 1), gen.real(-1, 1);
  double spread = 0;
  for (const auto& d : predict_alpha(params, x)) {
    spread += (*std::max_element(d.alpha().begin(), d.alpha().end()) -
               *std::min_element(d.alpha().begin(), d.alpha().end())) / d.alpha0();
  }
  CHECK(spread / 200 < 0.15);
}

TEST_CASE("forward") {
  TrainConfig c;
  c.layer_sizes = {3, 4, 2};
  auto p = init_network(c).zeros_like();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  CHECK(predict_logits(p, x).isZero());

  NetworkParams lin;
  lin.layers.push_back({Eigen::MatrixXd::Random(2, 3), Eigen::VectorXd::Random(2)});
  const Eigen::MatrixXd expected = (x * lin.layers[0].weight.transpose()).rowwise() + lin.layers[0].bias.transpose();
  CHECK((predict_logits(lin, x) - expected).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(forward(lin, Eigen::MatrixXd::Zero(2, 4)), ArgumentError);
}

TEST_CASE("backward basics") {
  NetworkParams lin;
  lin.layers.push_back({Eigen::MatrixXd::Random(2, 3), Eigen::VectorXd::Random(2)});
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  const auto fr = forward(lin, x);
  const auto zero = backward(lin, fr.cache, Eigen::MatrixXd::Zero(4, 2));
  CHECK(zero.layers[0].weight.isZero());
  CHECK(zero.layers[0].bias.isZero());

  const Eigen::MatrixXd g = Eigen::MatrixXd::Random(4, 2);
  const auto grads = backward(lin, fr.cache, g);
  CHECK((grads.layers[0].weight - g.transpose() * x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((grads.layers[0].bias - g.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-14);

  // A hidden unit with negative pre-activation passes no gradient to its inputs.
  NetworkParams two;
  Eigen::MatrixXd w1(2, 1);
  w1 << 1.0, -1.0;
  two.layers.push_back({w1, Eigen::VectorXd::Zero(2)});
  two.layers.push_back({Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Zero(1)});
  Eigen::MatrixXd xin(1, 1);
  xin << 2.0;
  const auto f2 = forward(two, xin);
  const auto g2 = backward(two, f2.cache, Eigen::MatrixXd::Ones(1, 1));
  CHECK(g2.layers[0].weight(0, 0) == 2.0);
  CHECK(g2.layers[0].weight(1, 0) == 0.0);
  CHECK(g2.layers[1].weight(0, 1) == 0.0);

  const auto other = forward(lin, Eigen::MatrixXd::Random(3, 3));
  CHECK_THROWS_AS(backward(lin, other.cache, g), ArgumentError);
}

TEST_CASE("end-to-end gradients match central differences") {
  oracle::Gen gen(32);
  for (LossKind kind : {LossKind::dappr, LossKind::cross_entropy}) {
    double worst = 0;
    for (int i = 0; i < 30; ++i) {
      TrainConfig c;
      const int d = gen.integer(2, 4), K = gen.integer(2, 4);
      c.layer_sizes = {d, gen.integer(2, 32), gen.integer(2, 32), K};
      c.seed = static_cast<std::uint64_t>(i);
      auto params = init_network(c);
      const int B = gen.integer(1, 4);
      Eigen::MatrixXd x(B, d);
      for (Eigen::Index r = 0; r < B; ++r) {
        for (int k = 0; k < d; ++k) x(r, k) = gen.real(-2, 2);
      }
      std::vector<int> y(B);
      for (auto& v : y) v = gen.integer(0, K - 1);
      LossConfig lc;
      lc.schedule = LambdaSchedule::constant;
      lc.lambda = gen.coin() ? 0.0 : 2e-3;

      const auto base = forward(params, x);
      const Eigen::MatrixXd target = detached_target(base.logits, y, lc.eps);
      const auto grads = backward(params, base.cache, compute_loss(kind, base.logits, y, lc, 1).grad_logits);

      double scale = 0, diff = 0;
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& w = params.layers[l].weight;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
          const double o = w(j);
          w(j) = o + 1e-5;
          const auto up = forward(params, x);
          w(j) = o - 1e-5;
          const auto dn = forward(params, x);
          w(j) = o;
          bool kink = false;
          for (std::size_t h = 0; h + 1 < params.layers.size(); ++h) {
            kink |= ((up.cache.pre_activations[h].array() > 0) != (base.cache.pre_activations[h].array() > 0)).any();
            kink |= ((dn.cache.pre_activations[h].array() > 0) != (base.cache.pre_activations[h].array() > 0)).any();
          }
          if (kink) continue;
          const double num = (objective(kind, up.logits, y, target, lc.lambda) -
                              objective(kind, dn.logits, y, target, lc.lambda)) / 2e-5;
          scale = std::max({scale, std::abs(num), std::abs(grads.layers[l].weight(j))});
          diff = std::max(diff, std::abs(num - grads.layers[l].weight(j)));
        }
      }
      if (scale > 0) worst = std::max(worst, diff / scale);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("optimisers") {
  NetworkParams p;
  p.layers.push_back({Eigen::MatrixXd::Constant(1, 2, 1.0), Eigen::VectorXd::Constant(1, 1.0)});
  NetworkParams g = p.zeros_like();
  g.layers[0].weight << 0.5, -2.0;
  g.layers[0].bias << 4.0;

  NetworkParams s = p;
  Optimizer sgd(OptimizerKind::sgd, 0.1);
  sgd.step(s, g);
  CHECK(s.layers[0].weight(0, 0) == doctest::Approx(0.95));
  CHECK(s.layers[0].weight(0, 1) == doctest::Approx(1.2));
  CHECK(s.layers[0].bias(0) == doctest::Approx(0.6));

  // First bias-corrected Adam step has magnitude lr in every coordinate.
  NetworkParams a = p;
  Optimizer adam(OptimizerKind::adam, 0.01);
  adam.step(a, g);
  CHECK(a.layers[0].weight(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(a.layers[0].weight(0, 1) == doctest::Approx(1.01).epsilon(1e-6));
  CHECK(a.layers[0].bias(0) == doctest::Approx(0.99).epsilon(1e-6));

  NetworkParams w = p;
  Optimizer decay(OptimizerKind::sgd, 0.1, 0.5);
  decay.step(w, g.zeros_like());
  CHECK(w.layers[0].weight(0, 0) == doctest::Approx(0.95));
  CHECK(w.layers[0].bias(0) == 1.0);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(50, 1, 1), b = epoch_order(50, 1, 1), c = epoch_order(50, 1, 2);
  CHECK(a == b);
  CHECK(a != c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("training on separable blobs") {
  const auto s = two_blobs();
  const auto dappr_run = train(blob_config(LossKind::dappr, 1), s.train, s.val);
  CHECK(dappr_run.history.records.size() == 50);
  CHECK(dappr_run.history.records.back().val_accuracy >= 0.98);
  // The DAPPr value is a log-possibility against a moving detached target; it climbs toward 0 while
  // the evidence grows, so track alpha0 instead of the value.
  CHECK(dappr_run.history.records.back().val_mean_alpha0 > dappr_run.history.records.front().val_mean_alpha0);
  const auto ce_run = train(blob_config(LossKind::cross_entropy, 1), s.train, s.val);
  CHECK(ce_run.history.records.back().train_loss < ce_run.history.records.front().train_loss);
  CHECK(std::abs(accuracy(dappr_run.params, s.test) - accuracy(ce_run.params, s.test)) <= 0.02);
  CHECK(dappr_run.history.to_csv().rfind("epoch,train_loss,val_accuracy,val_mean_alpha0\n", 0) == 0);
}

TEST_CASE("the mode moves to the label on correctly classified points") {
  const auto s = two_blobs();
  const auto run = train(blob_config(LossKind::dappr, 2), s.train, s.val);
  const auto alphas = predict_alpha(run.params, s.val.features);
  const auto pred = predict_labels(run.params, s.val.features);
  int correct = 0, agree = 0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (pred[i] != s.val.labels[i]) continue;
    ++correct;
    const auto p = eps_adjusted_maximiser(alphas[i], static_cast<std::size_t>(s.val.labels[i]), 1e-8);
    const auto& a = alphas[i].alpha();
    const auto arg_a = std::max_element(a.begin(), a.end()) - a.begin();
    const auto arg_p = std::max_element(p.probs().begin(), p.probs().end()) - p.probs().begin();
    agree += arg_a == arg_p;
  }
  REQUIRE(correct > 0);
  CHECK(static_cast<double>(agree) / correct >= 0.95);
}

TEST_CASE("training is bitwise deterministic") {
  const auto s = two_blobs();
  const auto a = train(blob_config(LossKind::dappr, 5), s.train, s.val);
  const auto b = train(blob_config(LossKind::dappr, 5), s.train, s.val);
  for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
    CHECK(a.params.layers[l].weight == b.params.layers[l].weight);
    CHECK(a.params.layers[l].bias == b.params.layers[l].bias);
  }
  CHECK(a.history.to_csv() == b.history.to_csv());
}

TEST_CASE("zero epochs returns the initial parameters") {
  const auto s = two_blobs();
  auto c = blob_config(LossKind::dappr, 6);
  c.epochs = 0;
  const auto r = train(c, s.train, s.val);
  CHECK(r.history.records.empty());
  CHECK(r.params.layers[0].weight == init_network(c).layers[0].weight);
}

TEST_CASE("early stopping keeps the best validation epoch") {
  const auto s = two_blobs();
  auto c = blob_config(LossKind::dappr, 7);
  c.epochs = 12;
  c.early_stopping = true;
  const auto r = train(c, s.train, s.val);
  double best = -1;
  int best_epoch = 0;
  for (const auto& rec : r.history.records) {
    if (rec.val_accuracy > best) {
      best = rec.val_accuracy;
      best_epoch = rec.epoch;
    }
  }
  CHECK(r.selected_epoch == best_epoch);
  CHECK(accuracy(r.params, s.val) == best);
}

TEST_CASE("training input validation") {
  const auto s = two_blobs();
  auto c = blob_config(LossKind::dappr, 1);
  LabeledDataset empty;
  empty.num_classes = 2;
  empty.features.resize(0, 2);
  CHECK_THROWS_AS(train(c, empty, s.val), ArgumentError);
  c.layer_sizes = {3, 8, 2};
  CHECK_THROWS_AS(train(c, s.train, s.val), ArgumentError);
}

TEST_CASE("predicted concentrations compose softplus and forward") {
  const auto s = two_blobs();
  auto c = blob_config(LossKind::dappr, 8);
  const auto params = init_network(c);
  const auto logits = predict_logits(params, s.test.features);
  const auto alphas = predict_alpha(params, s.test.features);
  REQUIRE(alphas.size() == s.test.size());
  for (std::size_t r = 0; r < alphas.size(); ++r) {
    std::vector<double> z(logits.cols());
    for (Eigen::Index k = 0; k < logits.cols(); ++k) z[k] = logits(r, k);
    CHECK(alphas[r].alpha() == softplus_plus_one(z).alpha());
    for (double a : alphas[r].alpha()) CHECK(a > 1.0);
  }
}

TEST_CASE("checkpoint round trip") {
  TrainConfig c;
  c.layer_sizes = {2, 5, 3};
  c.seed = 77;
  auto params = init_network(c);
  params.layers[1].bias << 0.1, -1e-300, 3.141592653589793;
  const Checkpoint ck{params, 77, LossKind::cross_entropy};
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
  CHECK(back.seed == 77);
  CHECK(back.loss_kind == LossKind::cross_entropy);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.params.layers[l].weight == params.layers[l].weight);
    CHECK(back.params.layers[l].bias == params.layers[l].bias);
  }
  CHECK_THROWS(checkpoint_from_json("{\"layer_sizes\": [2, 3]}"));
}
