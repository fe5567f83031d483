#include "sacnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "sacnet/error.hpp"

namespace sacnet {

void OptimizerConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("optimizer lr must be >= 0");
  if (!(weight_decay >= 0)) throw ConfigError("optimizer weight_decay must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("optimizer momentum must be in [0, 1)");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("optimizer beta1 and beta2 must be in [0, 1)");
  }
  if (!(epsilon > 0)) throw ConfigError("optimizer epsilon must be > 0");
  if (!(lr_drop_factor > 0)) throw ConfigError("optimizer lr_drop_factor must be > 0");
  if (max_iterations < 0) throw ConfigError("optimizer max_iterations must be >= 0");
}

double OptimizerConfig::lr_at(int64_t iteration) const {
  if (lr_drop_iteration >= 0 && iteration >= lr_drop_iteration) return lr * lr_drop_factor;
  return lr;
}

OptimizerConfig OptimizerConfig::preset(const std::string& name) {
  OptimizerConfig c;
  if (name == "sgd") {
    c.kind = OptimizerKind::kSgd;
    c.lr = 1e-3;
  } else if (name == "adam") {
    c.kind = OptimizerKind::kAdam;
    c.lr = 1e-4;
  } else if (name == "paper-sgd") {
    c.kind = OptimizerKind::kSgd;
    c.lr = 1e-8;
    c.lr_drop_iteration = 13000;
    c.max_iterations = 20000;
  } else if (name == "paper-adam") {
    c.kind = OptimizerKind::kAdam;
    c.lr = 1e-5;
    c.max_iterations = 50000;
  } else {
    throw ConfigError("unknown optimizer preset '" + name +
                      "' (expected sgd, adam, paper-sgd or paper-adam)");
  }
  return c;
}

Optimizer::Optimizer(OptimizerConfig cfg, NamedParams params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  for (const auto& np : params_) {
    first_.emplace_back(np.second->value.shape());
    second_.emplace_back(cfg_.kind == OptimizerKind::kAdam ? np.second->value.shape()
                                                           : Shape{});
  }
}

void Optimizer::step(double lr) {
  for (const auto& [name, p] : params_) {
    for (float g : p->grad.data()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in " + name + " at update " +
                           std::to_string(steps_));
      }
    }
  }
  ++steps_;
  const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i].second;
    const double wd = p.decay ? cfg_.weight_decay : 0.0;
    float* w = p.value.data().data();
    const float* g = p.grad.data().data();
    float* m = first_[i].data().data();
    const int64_t n = p.value.numel();
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (int64_t j = 0; j < n; ++j) {
        const double v = cfg_.momentum * m[j] + g[j] + wd * w[j];
        m[j] = static_cast<float>(v);
        w[j] = static_cast<float>(w[j] - lr * v);
      }
    } else {
      float* v = second_[i].data().data();
      for (int64_t j = 0; j < n; ++j) {
        const double mj = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * g[j];
        const double vj = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * static_cast<double>(g[j]) * g[j];
        m[j] = static_cast<float>(mj);
        v[j] = static_cast<float>(vj);
        const double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.epsilon);
        // Decoupled decay: shrinks the weight directly.
        w[j] = static_cast<float>(w[j] - lr * (update + wd * w[j]));
      }
    }
  }
}

bool augment_flip(Tensor& image, Tensor& mask, Rng& rng) {
  if (image.h() != mask.h() || image.w() != mask.w()) {
    throw ShapeError("augment_flip: image " + image.shape().str() + " and mask " +
                     mask.shape().str() + " differ in size");
  }
  if (!coin(rng)) return false;
  image = flip_lr(image);
  mask = flip_lr(mask);
  return true;
}

void TrainConfig::validate() const {
  optimizer.validate();
  if (accumulation < 1) throw ConfigError("train.accumulation must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) {
    throw ConfigError("train.checkpoint_every needs a checkpoint directory");
  }
}

std::string loss_trace_csv(const std::vector<LossRecord>& trace) {
  std::string out = "update_index,loss,lr,wall_ms\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.3f\n",
                  static_cast<long long>(r.update), r.loss, r.lr, r.wall_ms);
    out += buf;
  }
  return out;
}

TrainResult train_loop(const std::vector<Sample>& dataset,
                       const NetConfig& net_cfg, const TrainConfig& cfg,
                       NetWeights& w, const UpdateCallback& on_update) {
  cfg.validate();
  net_cfg.validate();
  if (dataset.empty()) throw DataError("training dataset is empty");

  Optimizer opt(cfg.optimizer, trainable_params(w));
  // Independent of the weight-initialization stream.
  Rng rng(cfg.seed ^ 0x5deece66dull);
  std::vector<size_t> order(dataset.size());
  size_t cursor = order.size();

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  const int64_t updates = cfg.optimizer.max_iterations / cfg.accumulation;
  for (int64_t u = 0; u < updates; ++u) {
    w.zero_grad();
    const int64_t first_iteration = result.iterations;
    double loss_sum = 0;
    for (int k = 0; k < cfg.accumulation; ++k) {
      if (cursor == order.size()) {
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, rng);
        cursor = 0;
      }
      const Sample& s = dataset[order[cursor++]];
      Tensor image = s.image;
      Tensor mask = s.mask;
      if (cfg.flip) augment_flip(image, mask, rng);
      const double loss = loss_and_backward(image, mask, net_cfg, w);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss on sample " + s.id + " at update " +
                           std::to_string(u));
      }
      loss_sum += loss;
      ++result.iterations;
    }
    const double lr = cfg.optimizer.lr_at(first_iteration);
    opt.step(lr);
    ++result.updates;

    LossRecord rec;
    rec.update = u;
    rec.loss = loss_sum / cfg.accumulation;
    rec.lr = lr;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    result.trace.push_back(rec);
    if (on_update) on_update(rec);
    if (cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "update_%06lld.sacw", static_cast<long long>(u + 1));
      std::filesystem::create_directories(cfg.checkpoint_dir);
      save_weights(w, net_cfg, cfg.checkpoint_dir / name);
    }
  }
  return result;
}

}  // namespace sacnet
