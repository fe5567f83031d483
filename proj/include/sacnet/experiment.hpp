#ifndef SACNET_EXPERIMENT_HPP_
#define SACNET_EXPERIMENT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "sacnet/config.hpp"
#include "sacnet/data.hpp"
#include "sacnet/metrics.hpp"
#include "sacnet/train.hpp"

namespace sacnet {

struct ExperimentResult {
  std::string label;
  uint64_t seed = 0;
  TrainResult train;
  // Mean per-sample loss over the first and last `window` updates.
  double initial_loss = 0;
  double final_loss = 0;
  EvalReport eval;
  double seconds = 0;
};

// Mean of trace[begin, end) losses.
double mean_loss(const std::vector<LossRecord>& trace, size_t begin, size_t end);

// Trains a fresh network (initialized from cfg.train.seed) on train_set and
// evaluates its saliency maps on eval_set.
ExperimentResult run_experiment(const RunConfig& cfg,
                                const std::vector<Sample>& train_set,
                                const std::vector<Sample>& eval_set,
                                const std::string& label, size_t window = 10);

std::vector<EvalItem> predict_items(const std::vector<Sample>& samples,
                                    const NetConfig& cfg, NetWeights& w);

// Variants of base along one ablation axis: n, beta, rounds, directions,
// attention. Raises ConfigError for other names.
std::vector<std::pair<std::string, RunConfig>> ablation_variants(
    const RunConfig& base, const std::string& axis);

// One row per result: variant,seed,initial_loss,final_loss,fbeta_max,
// fbeta_adaptive,smeasure,mae,ber,seconds.
std::string ablation_csv(const std::vector<ExperimentResult>& results);

}  // namespace sacnet

#endif  // SACNET_EXPERIMENT_HPP_
