#ifndef SACNET_TRAIN_HPP_
#define SACNET_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sacnet/data.hpp"
#include "sacnet/gradient_suite.hpp"
#include "sacnet/net.hpp"
#include "sacnet/random.hpp"

namespace sacnet {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  // SGD
  double momentum = 0.9;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // The learning rate is multiplied by lr_drop_factor from this training
  // iteration on; negative disables the drop.
  int64_t lr_drop_iteration = -1;
  double lr_drop_factor = 0.1;
  // Training iterations, one sample each.
  int64_t max_iterations = 20000;

  void validate() const;
  double lr_at(int64_t iteration) const;

  // "sgd", "adam" (toy defaults), "paper-sgd", "paper-adam".
  static OptimizerConfig preset(const std::string& name);
};

// Optimizer state for a fixed, ordered parameter list.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, NamedParams params);

  // One update from the gradients held in each Param::grad. Raises
  // NumericError naming the parameter if a gradient is not finite.
  void step(double lr);
  int64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return cfg_; }
  // Momentum (SGD) or first moment (Adam) of parameter i.
  const Tensor& first_moment(size_t i) const { return first_[i]; }
  const Tensor& second_moment(size_t i) const { return second_[i]; }

 private:
  OptimizerConfig cfg_;
  NamedParams params_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  int64_t steps_ = 0;
};

// With probability 0.5 flips image and mask left-right together.
// Returns whether it flipped.
bool augment_flip(Tensor& image, Tensor& mask, Rng& rng);

struct TrainConfig {
  OptimizerConfig optimizer;
  // Samples whose gradients are summed into one weight update.
  int accumulation = 10;
  bool flip = true;
  // Seeds both the weight initialization and the sample order.
  uint64_t seed = 0;
  // Write a checkpoint every this many updates (0 = never).
  int64_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct LossRecord {
  int64_t update = 0;
  // Mean per-sample loss over the samples of this update.
  double loss = 0;
  double lr = 0;
  // Wall time since training started; excluded from reproducibility.
  double wall_ms = 0;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  int64_t iterations = 0;
  int64_t updates = 0;
};

// "update_index,loss,lr,wall_ms" followed by one row per record.
std::string loss_trace_csv(const std::vector<LossRecord>& trace);

using UpdateCallback = std::function<void(const LossRecord&)>;

// Trains w in place for cfg.optimizer.max_iterations samples, visiting the
// dataset in a freshly shuffled order each epoch. Iterations past the last
// full accumulation window are not run.
TrainResult train_loop(const std::vector<Sample>& dataset,
                       const NetConfig& net_cfg, const TrainConfig& cfg,
                       NetWeights& w, const UpdateCallback& on_update = {});

}  // namespace sacnet

#endif  // SACNET_TRAIN_HPP_
