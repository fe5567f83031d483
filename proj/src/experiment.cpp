#include "sacnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "sacnet/error.hpp"

namespace sacnet {

double mean_loss(const std::vector<LossRecord>& trace, size_t begin, size_t end) {
  end = std::min(end, trace.size());
  if (begin >= end) return 0.0;
  double s = 0;
  for (size_t i = begin; i < end; ++i) s += trace[i].loss;
  return s / static_cast<double>(end - begin);
}

std::vector<EvalItem> predict_items(const std::vector<Sample>& samples,
                                    const NetConfig& cfg, NetWeights& w) {
  std::vector<EvalItem> items;
  items.reserve(samples.size());
  for (const Sample& s : samples) {
    items.push_back({s.id, predict(s.image, cfg, w).saliency, s.mask});
  }
  return items;
}

ExperimentResult run_experiment(const RunConfig& cfg,
                                const std::vector<Sample>& train_set,
                                const std::vector<Sample>& eval_set,
                                const std::string& label, size_t window) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  r.label = label;
  r.seed = cfg.train.seed;
  NetWeights w = NetWeights::make(cfg.net, cfg.train.seed);
  r.train = train_loop(train_set, cfg.net, cfg.train, w);
  const size_t n = r.train.trace.size();
  r.initial_loss = mean_loss(r.train.trace, 0, window);
  r.final_loss = mean_loss(r.train.trace, n > window ? n - window : 0, n);
  r.eval = evaluate(predict_items(eval_set, cfg.net, w));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<std::pair<std::string, RunConfig>> ablation_variants(
    const RunConfig& base, const std::string& axis) {
  std::vector<std::pair<std::string, RunConfig>> out;
  auto add = [&](const std::string& label, auto edit) {
    RunConfig c = base;
    c.net.use_sac = true;
    edit(c);
    out.emplace_back(label, c);
  };
  if (axis == "n") {
    for (int n = 1; n <= 5; ++n) {
      add("n=" + std::to_string(n), [n](RunConfig& c) { c.net.sac.n = n; });
    }
  } else if (axis == "beta") {
    add("learnable", [](RunConfig& c) { c.net.sac.beta_learnable = true; });
    for (float b : {0.0f, 0.1f, 1.0f}) {
      char label[32];
      std::snprintf(label, sizeof(label), "fixed(%g)", b);
      add(label, [b](RunConfig& c) {
        c.net.sac.beta_learnable = false;
        c.net.sac.beta_init = b;
      });
    }
  } else if (axis == "rounds") {
    for (int r = 1; r <= 3; ++r) {
      add("rounds=" + std::to_string(r), [r](RunConfig& c) { c.net.sac.rounds = r; });
    }
  } else if (axis == "directions") {
    add("all", [](RunConfig&) {});
    for (Direction d : kAllDirections) {
      add("w/o " + std::string(to_string(d)), [d](RunConfig& c) {
        c.net.sac.directions = {true, true, true, true};
        c.net.sac.directions[static_cast<int>(d)] = false;
      });
    }
  } else if (axis == "attention") {
    add("attention", [](RunConfig& c) { c.net.sac.uniform_attention = false; });
    add("w/o attention", [](RunConfig& c) { c.net.sac.uniform_attention = true; });
  } else {
    throw ConfigError("unknown ablation axis '" + axis +
                      "' (expected n, beta, rounds, directions or attention)");
  }
  return out;
}

std::string ablation_csv(const std::vector<ExperimentResult>& results) {
  std::string out =
      "variant,seed,initial_loss,final_loss,fbeta_max,fbeta_adaptive,smeasure,"
      "mae,ber,seconds\n";
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.6g,%.6g,%.6f,%.6f,%.6f,%.6f,%.4f,%.1f\n",
                  r.label.c_str(), static_cast<unsigned long long>(r.seed),
                  r.initial_loss, r.final_loss, r.eval.fbeta_max,
                  r.eval.fbeta_adaptive, r.eval.smeasure, r.eval.mae, r.eval.ber,
                  r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace sacnet
