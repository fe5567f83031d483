#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "sacnet/error.hpp"
#include "sacnet/train.hpp"

using namespace sacnet;

namespace {

OptimizerConfig plain(OptimizerKind kind, double lr, double momentum = 0.0,
                      double wd = 0.0) {
  OptimizerConfig c;
  c.kind = kind;
  c.lr = lr;
  c.momentum = momentum;
  c.weight_decay = wd;
  return c;
}

Param scalar(float value, float grad, bool decay = true) {
  Param p(Tensor({1, 1, 1, 1}, value), decay);
  p.grad = Tensor({1, 1, 1, 1}, grad);
  return p;
}

NetConfig micro_config() {
  NetConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.backbone_channels = {4, 6, 6};
  cfg.width = 6;
  cfg.sac.n = 3;
  return cfg;
}

std::vector<Sample> micro_dataset() {
  SynthConfig sc;
  sc.size = 16;
  sc.count = 4;
  sc.min_fraction = 0.05;
  return synth_dataset(sc);
}

TrainConfig micro_train(int64_t iterations) {
  TrainConfig tc;
  tc.optimizer = OptimizerConfig::preset("adam");
  tc.optimizer.lr = 1e-3;
  tc.optimizer.max_iterations = iterations;
  return tc;
}

std::vector<Tensor> snapshot(NetWeights& w) {
  std::vector<Tensor> out;
  w.visit([&](const std::string&, Param& p) { out.push_back(p.value); });
  return out;
}

}  // namespace

TEST_CASE("SGD examples") {
  SUBCASE("zero gradient without decay leaves weights unchanged") {
    Param p = scalar(0.7f, 0.0f);
    Optimizer opt(plain(OptimizerKind::kSgd, 0.1, 0.9), {{"w", &p}});
    opt.step(0.1);
    CHECK(p.value[0] == 0.7f);
  }
  SUBCASE("plain descent") {
    Param p = scalar(0.0f, 1.0f);
    Optimizer opt(plain(OptimizerKind::kSgd, 0.1), {{"w", &p}});
    opt.step(0.1);
    CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-7));
  }
  SUBCASE("momentum: second step is 1.9 lr g") {
    Param p = scalar(0.0f, 2.0f);
    Optimizer opt(plain(OptimizerKind::kSgd, 0.01, 0.9), {{"w", &p}});
    opt.step(0.01);
    const double after_one = p.value[0];
    opt.step(0.01);
    CHECK(after_one - p.value[0] == doctest::Approx(1.9 * 0.01 * 2.0).epsilon(1e-5));
  }
  SUBCASE("decay only where enabled") {
    Param kernel = scalar(1.0f, 0.0f, true);
    Param bias = scalar(1.0f, 0.0f, false);
    Optimizer opt(plain(OptimizerKind::kSgd, 0.1, 0.0, 0.5),
                  {{"kernel", &kernel}, {"bias", &bias}});
    opt.step(0.1);
    CHECK(kernel.value[0] == doctest::Approx(0.95).epsilon(1e-7));
    CHECK(bias.value[0] == 1.0f);
  }
}

TEST_CASE("Adam examples") {
  SUBCASE("first step moves by lr") {
    for (float g : {0.003f, 1.0f, 250.0f}) {
      Param p = scalar(0.5f, g);
      Optimizer opt(plain(OptimizerKind::kAdam, 1e-3), {{"w", &p}});
      opt.step(1e-3);
      CHECK(0.5 - p.value[0] == doctest::Approx(1e-3).epsilon(1e-3));
    }
  }
  SUBCASE("zero gradient without decay leaves weights unchanged") {
    Param p = scalar(-0.25f, 0.0f);
    Optimizer opt(plain(OptimizerKind::kAdam, 1e-3), {{"w", &p}});
    for (int i = 0; i < 5; ++i) opt.step(1e-3);
    CHECK(p.value[0] == -0.25f);
  }
  SUBCASE("moments decay geometrically once gradients stop") {
    const double c = 0.8;
    Param p = scalar(0.0f, static_cast<float>(c));
    OptimizerConfig cfg = plain(OptimizerKind::kAdam, 1e-3);
    Optimizer opt(cfg, {{"w", &p}});
    opt.step(1e-3);
    p.zero_grad();
    for (int k = 1; k <= 30; ++k) {
      opt.step(1e-3);
      const double m = (1 - cfg.beta1) * c * std::pow(cfg.beta1, k);
      const double v = (1 - cfg.beta2) * c * c * std::pow(cfg.beta2, k);
      CHECK(opt.first_moment(0)[0] == doctest::Approx(m).epsilon(1e-5));
      CHECK(opt.second_moment(0)[0] == doctest::Approx(v).epsilon(1e-5));
    }
  }
  SUBCASE("decoupled decay") {
    Param p = scalar(2.0f, 0.0f);
    Optimizer opt(plain(OptimizerKind::kAdam, 0.1, 0.0, 0.5), {{"w", &p}});
    opt.step(0.1);
    CHECK(p.value[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.5)).epsilon(1e-7));
  }
}

TEST_CASE("non-finite gradients abort naming the parameter") {
  Param a = scalar(0.0f, 1.0f);
  Param b = scalar(0.0f, std::nanf(""));
  Optimizer opt(plain(OptimizerKind::kSgd, 0.1), {{"a", &a}, {"head.bias", &b}});
  try {
    opt.step(0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("head.bias") != std::string::npos);
  }
  // Nothing was applied.
  CHECK(a.value[0] == 0.0f);
}

TEST_CASE("optimizer presets and schedule") {
  const OptimizerConfig sgd = OptimizerConfig::preset("paper-sgd");
  CHECK(sgd.kind == OptimizerKind::kSgd);
  CHECK(sgd.momentum == 0.9);
  CHECK(sgd.weight_decay == 5e-4);
  CHECK(sgd.lr_at(12999) == 1e-8);
  CHECK(sgd.lr_at(13000) == doctest::Approx(1e-9));
  CHECK(sgd.max_iterations == 20000);
  const OptimizerConfig adam = OptimizerConfig::preset("paper-adam");
  CHECK(adam.lr == 1e-5);
  CHECK(adam.beta1 == 0.9);
  CHECK(adam.beta2 == 0.999);
  CHECK(adam.max_iterations == 50000);
  CHECK(OptimizerConfig::preset("adam").lr == 1e-4);
  CHECK(OptimizerConfig::preset("sgd").lr == 1e-3);
  CHECK_THROWS_AS(OptimizerConfig::preset("rmsprop"), ConfigError);
  OptimizerConfig bad;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("flip augmentation") {
  Tensor image({1, 3, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6,
                                                1, 2, 3, 4, 5, 6});
  Tensor mask({1, 1, 2, 3}, std::vector<float>{1, 0, 0, 1, 1, 0});
  Rng rng(11);
  int flips = 0;
  Tensor img = image, m = mask;
  while (!augment_flip(img, m, rng)) {}
  CHECK(m == Tensor({1, 1, 2, 3}, std::vector<float>{0, 0, 1, 0, 1, 1}));
  CHECK(img.at(0, 2, 1, 0) == 6.0f);
  CHECK(flip_lr(flip_lr(image)) == image);

  for (int i = 0; i < 10000; ++i) {
    Tensor a({1, 3, 1, 2}), b({1, 1, 1, 2});
    flips += augment_flip(a, b, rng) ? 1 : 0;
  }
  CHECK(flips >= 4700);
  CHECK(flips <= 5300);
  Tensor wrong({1, 1, 3, 3});
  CHECK_THROWS_AS(augment_flip(img, wrong, rng), ShapeError);
}

TEST_CASE("ten iterations make exactly one update") {
  const NetConfig cfg = micro_config();
  const auto data = micro_dataset();
  NetWeights w = NetWeights::make(cfg, 1);
  TrainResult r = train_loop(data, cfg, micro_train(10), w);
  CHECK(r.iterations == 10);
  CHECK(r.updates == 1);
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].update == 0);

  NetWeights w2 = NetWeights::make(cfg, 1);
  TrainResult r2 = train_loop(data, cfg, micro_train(29), w2);
  CHECK(r2.updates == 2);
  CHECK(r2.iterations == 20);
}

TEST_CASE("zero learning rate keeps weights bit-exact") {
  const NetConfig cfg = micro_config();
  NetWeights w = NetWeights::make(cfg, 2);
  const auto before = snapshot(w);
  TrainConfig tc = micro_train(30);
  tc.optimizer.lr = 0.0;
  train_loop(micro_dataset(), cfg, tc, w);
  CHECK(snapshot(w) == before);
}

TEST_CASE("training is bitwise reproducible") {
  const NetConfig cfg = micro_config();
  const auto data = micro_dataset();
  NetWeights a = NetWeights::make(cfg, 3);
  NetWeights b = NetWeights::make(cfg, 3);
  TrainResult ra = train_loop(data, cfg, micro_train(40), a);
  TrainResult rb = train_loop(data, cfg, micro_train(40), b);
  REQUIRE(ra.trace.size() == rb.trace.size());
  for (size_t i = 0; i < ra.trace.size(); ++i) {
    CHECK(ra.trace[i].loss == rb.trace[i].loss);
    CHECK(ra.trace[i].lr == rb.trace[i].lr);
  }
  CHECK(snapshot(a) == snapshot(b));
  NetWeights init = NetWeights::make(cfg, 3);
  CHECK_FALSE(snapshot(a) == snapshot(init));
}

TEST_CASE("accumulated update equals the update from summed gradients") {
  const NetConfig cfg = micro_config();
  const auto data = micro_dataset();
  NetWeights acc = NetWeights::make(cfg, 4);
  NetWeights sum = NetWeights::make(cfg, 4);
  acc.zero_grad();
  sum.zero_grad();
  NamedParams sum_params = trainable_params(sum);
  std::vector<Tensor> total;
  for (const auto& np : sum_params) total.emplace_back(np.second->value.shape());
  for (const Sample& s : data) {
    loss_and_backward(s.image, s.mask, cfg, acc);
    sum.zero_grad();
    loss_and_backward(s.image, s.mask, cfg, sum);
    for (size_t i = 0; i < total.size(); ++i) {
      for (int64_t j = 0; j < total[i].numel(); ++j) {
        total[i][j] += sum_params[i].second->grad[j];
      }
    }
  }
  for (size_t i = 0; i < total.size(); ++i) sum_params[i].second->grad = total[i];
  OptimizerConfig oc = OptimizerConfig::preset("adam");
  Optimizer oa(oc, trainable_params(acc));
  Optimizer os(oc, sum_params);
  oa.step(oc.lr);
  os.step(oc.lr);
  CHECK(snapshot(acc) == snapshot(sum));
}

TEST_CASE("frozen slopes stay fixed and checkpoints are written") {
  NetConfig cfg = micro_config();
  cfg.sac.beta_learnable = false;
  NetWeights w = NetWeights::make(cfg, 5);
  const Tensor beta = w.sac[0]->rounds[0].betas[0].value;
  const Tensor kernel = w.heads[0].kernel.value;
  TrainConfig tc = micro_train(40);
  tc.checkpoint_every = 2;
  tc.checkpoint_dir = std::filesystem::temp_directory_path() / "sacnet_train_ckpt";
  std::filesystem::remove_all(tc.checkpoint_dir);
  int callbacks = 0;
  TrainResult r = train_loop(micro_dataset(), cfg, tc, w,
                             [&](const LossRecord&) { ++callbacks; });
  CHECK(callbacks == 4);
  CHECK(w.sac[0]->rounds[0].betas[0].value == beta);
  CHECK_FALSE(w.heads[0].kernel.value == kernel);
  CHECK(std::filesystem::exists(tc.checkpoint_dir / "update_000002.sacw"));
  CHECK(std::filesystem::exists(tc.checkpoint_dir / "update_000004.sacw"));
  NetWeights loaded = load_weights(cfg, tc.checkpoint_dir / "update_000004.sacw");
  CHECK(loaded.heads[0].kernel.value == w.heads[0].kernel.value);
  std::filesystem::remove_all(tc.checkpoint_dir);

  const std::string csv = loss_trace_csv(r.trace);
  CHECK(csv.rfind("update_index,loss,lr,wall_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("training input errors") {
  const NetConfig cfg = micro_config();
  NetWeights w = NetWeights::make(cfg, 6);
  CHECK_THROWS_AS(train_loop({}, cfg, micro_train(10), w), DataError);
  TrainConfig tc = micro_train(10);
  tc.accumulation = 0;
  CHECK_THROWS_AS(train_loop(micro_dataset(), cfg, tc, w), ConfigError);
}
