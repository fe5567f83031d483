// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles/metrics_oracle.hpp"
#include "oracles/naive_scan.hpp"
#include "sacnet/config.hpp"
#include "sacnet/data.hpp"
#include "sacnet/experiment.hpp"
#include "sacnet/gradient_suite.hpp"
#include "sacnet/graph.hpp"
#include "sacnet/metrics.hpp"
#include "sacnet/random.hpp"
#include "sacnet/sac.hpp"
#include "sacnet/scan.hpp"
#include "sacnet/train.hpp"

using namespace sacnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

template <typename T>
BasicTensor<T> random_tensor(Shape s, Rng& rng, double lo, double hi) {
  BasicTensor<T> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

Shape random_shape(Rng& rng, int64_t n, int64_t c, int64_t h, int64_t w) {
  return {1 + static_cast<int64_t>(uniform_index(rng, n)),
          1 + static_cast<int64_t>(uniform_index(rng, c)),
          1 + static_cast<int64_t>(uniform_index(rng, h)),
          1 + static_cast<int64_t>(uniform_index(rng, w))};
}

Outcome scan_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const float alphas[] = {0.0f, 1.0f / 3.0f, 2.0f / 3.0f, 1.0f};
  const float betas[] = {0.0f, 0.1f, 1.0f};
  int64_t cases = 0, mismatches = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const Shape s = random_shape(rng, 2, 4, 8, 8);
    const Tensor x = random_tensor<float>(s, rng, -2, 2);
    for (float alpha : alphas) {
      for (float b : betas) {
        const Tensor beta({1, s.c, 1, 1}, b);
        for (Direction d : kAllDirections) {
          ++cases;
          if (!(attenuated_scan(x, d, alpha, beta).out ==
                oracle::naive_scan(x, d, alpha, beta))) {
            ++mismatches;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt("%lld/%lld (map, alpha, beta, direction) cases bit-exact, %.2f s (limit 5 s)",
              static_cast<long long>(cases - mismatches), static_cast<long long>(cases), secs)};
}

Outcome closed_form_limits() {
  int64_t leaky_bad = 0, leaky_total = 0;
  double prefix_worst = 0;
  int64_t prefix_exact_bad = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(2000 + seed);
    const Shape s = random_shape(rng, 2, 4, 8, 8);
    const Tensor x = random_tensor<float>(s, rng, -2, 2);
    for (float b : {0.0f, 0.1f, 1.0f}) {
      const Tensor beta({1, s.c, 1, 1}, b);
      for (Direction d : kAllDirections) {
        const Tensor out = attenuated_scan(x, d, 1.0f, beta).out;
        for (int64_t i = 0; i < x.numel(); ++i) {
          const float expect = std::max(x[i], 0.0f) + b * std::min(x[i], 0.0f);
          ++leaky_total;
          if (out[i] != expect) ++leaky_bad;
        }
      }
    }
    // Positive inputs keep partial sums away from zero so relative error is
    // meaningful; mixed signs are compared against float running sums.
    const Tensor pos = random_tensor<float>(s, rng, 0.1, 1);
    const Tensor ones({1, s.c, 1, 1}, 1.0f);
    const Tensor up = attenuated_scan(pos, Direction::kUp, 0.0f, ones).out;
    const Tensor up_mixed = attenuated_scan(x, Direction::kUp, 0.0f, ones).out;
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t c = 0; c < s.c; ++c) {
        for (int64_t j = 0; j < s.w; ++j) {
          double sum = 0;
          float running = 0;
          for (int64_t i = 0; i < s.h; ++i) {
            sum += pos.at(n, c, i, j);
            running += x.at(n, c, i, j);
            prefix_worst = std::max(prefix_worst, std::abs(up.at(n, c, i, j) - sum) / sum);
            if (up_mixed.at(n, c, i, j) != running) ++prefix_exact_bad;
          }
        }
      }
    }
  }
  return {leaky_bad == 0 && prefix_worst <= 1e-5 && prefix_exact_bad == 0,
          fmt("alpha=1: %lld/%lld pixels equal the leaky relu exactly; alpha=0, beta=1 "
              "up-scan: max relative error %.2e vs column prefix sums (limit 1e-5), "
              "%lld mismatches vs float running sums",
              static_cast<long long>(leaky_total - leaky_bad),
              static_cast<long long>(leaky_total), prefix_worst,
              static_cast<long long>(prefix_exact_bad))};
}

Outcome gradient_suite() {
  struct Scope {
    const char* name;
    GradCheckReport (*check)(uint64_t);
    double limit;
  };
  const Scope scopes[] = {{"scan", check_scan, 1e-5},
                          {"attention", check_attention, 1e-3},
                          {"sac", check_sac, 1e-3},
                          {"micro-net", check_micro_net, 1e-3}};
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  for (const Scope& s : scopes) {
    double worst = 0;
    int failed = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const GradCheckReport r = s.check(3000 + seed);
      worst = std::max(worst, r.max_rel_error);
      if (!r.passed || r.tolerance > s.limit || r.checked == 0) ++failed;
    }
    o.pass = o.pass && failed == 0;
    o.detail += fmt("%s %d/20 seeds (worst %.2e, limit %.0e); ", s.name, 20 - failed, worst,
                    s.limit);
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < 120;
  o.detail += fmt("%.1f s (limit 120 s)", secs);
  return o;
}

Outcome global_context() {
  SacConfig cfg;
  cfg.width = 12;
  cfg.n = 3;
  cfg.rounds = 2;
  const int64_t h = 8, w = 8;
  double smallest = INFINITY;
  int64_t zero = 0, pairs = 0;
  for (uint64_t init = 0; init < 10; ++init) {
    Rng rng(4000 + init);
    SacWeights weights = SacWeights::make(cfg, rng);
    const Tensor x = random_tensor<float>({1, cfg.width, h, w}, rng, -1, 1);
    for (int64_t oy = 0; oy < h; ++oy) {
      for (int64_t ox = 0; ox < w; ++ox) {
        // The corner farthest from the output pixel.
        const int64_t fy = oy < h - 1 - oy ? h - 1 : 0;
        const int64_t fx = ox < w - 1 - ox ? w - 1 : 0;
        Graph g;
        Graph::Var in = g.input(x);
        Graph::Var out = sac_forward(g, in, cfg, weights);
        Tensor seed(g.value(out).shape());
        for (int64_t c = 0; c < seed.c(); ++c) seed.at(0, c, oy, ox) = 1.0f;
        g.backward(out, seed);
        double mag = 0;
        for (int64_t c = 0; c < cfg.width; ++c) {
          mag = std::max(mag, static_cast<double>(std::abs(g.grad(in).at(0, c, fy, fx))));
        }
        ++pairs;
        if (!(mag > 1e-12)) ++zero;
        smallest = std::min(smallest, mag);
      }
    }
  }
  return {zero == 0,
          fmt("%lld/%lld (init, output pixel) pairs reach the farthest input pixel over 10 "
              "inits, smallest |grad| %.3e (limit > 1e-12)",
              static_cast<long long>(pairs - zero), static_cast<long long>(pairs), smallest)};
}

Outcome attention_invariants() {
  double worst = 0;
  int64_t pixels = 0;
  for (uint64_t init = 0; init < 10; ++init) {
    Rng rng(5000 + init);
    const int n = 2 + static_cast<int>(init % 4);
    AttentionWeights w = AttentionWeights::make(8, 4, n, 0, rng);
    const Tensor feats = random_tensor<float>({2, 8, 9, 11}, rng, -3, 3);
    const Tensor weights = attention_weights(feats, w).out;
    for (int p = 0; p < 100; ++p) {
      const int64_t b = static_cast<int64_t>(uniform_index(rng, 2));
      const int64_t i = static_cast<int64_t>(uniform_index(rng, 9));
      const int64_t j = static_cast<int64_t>(uniform_index(rng, 11));
      double sum = 0;
      for (int k = 0; k < n; ++k) sum += weights.at(b, k, i, j);
      worst = std::max(worst, std::abs(sum - 1.0));
      ++pixels;
    }
  }
  int equal = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(5100 + seed);
    SacConfig cfg;
    cfg.width = 4 + static_cast<int>(seed % 3) * 2;
    cfg.n = 1;
    cfg.rounds = 1 + static_cast<int>(seed % 3);
    SacWeights w = SacWeights::make(cfg, rng);
    const Tensor x = random_tensor<float>({1, cfg.width, 5, 7}, rng, -1, 1);
    const Tensor learned = sac_forward(x, cfg, w).out;
    SacConfig uniform = cfg;
    uniform.uniform_attention = true;
    if (sac_forward(x, uniform, w).out == learned) ++equal;
  }
  return {worst <= 1e-6 && equal == 10,
          fmt("%lld pixels, max |sum - 1| = %.2e (limit 1e-6); n=1 equals uniform "
              "weights bit-exactly in %d/10 modules",
              static_cast<long long>(pixels), worst, equal)};
}

Outcome metric_oracles() {
  int exact = 0, s_self = 0;
  double s_dev = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto [pred, gt] = oracle::random_pair(seed);
    const oracle::Brute b = oracle::brute_force(pred, gt);
    const FMeasure f = f_measure(pred, gt);
    bool ok = f.max_f == b.max_f && f.adaptive_f == b.adaptive_f &&
              mae(pred, gt) == b.mae && ber(pred, gt).ber == b.ber;
    for (int k = 0; k < kThresholds; ++k) {
      ok = ok && f.precision[k] == b.precision[k] && f.recall[k] == b.recall[k];
    }
    exact += ok ? 1 : 0;
    // The score carries eps guards, so self-similarity is 1 up to rounding.
    const double dev = std::abs(s_measure(gt, gt) - 1.0);
    s_dev = std::max(s_dev, dev);
    s_self += dev <= 1e-12 ? 1 : 0;
  }
  double worst = 0;
  for (const oracle::Golden& g : oracle::kGolden) {
    auto [pred, gt] = oracle::golden_fixture(g.name);
    const FMeasure f = f_measure(pred, gt);
    worst = std::max({worst, std::abs(f.max_f - g.fmax), std::abs(f.adaptive_f - g.fadaptive),
                      std::abs(s_measure(pred, gt) - g.s), std::abs(mae(pred, gt) - g.mae),
                      std::abs(ber(pred, gt).ber - g.ber)});
  }
  return {exact == 100 && s_self == 100 && worst <= 1e-6,
          fmt("%d/100 pairs match brute force exactly; S(G,G)=1 within 1e-12 for %d/100 "
              "(max deviation %.1e); golden fixtures max deviation %.2e (limit 1e-6)",
              exact, s_self, s_dev, worst)};
}

struct ToyRuns {
  std::map<std::string, std::vector<ExperimentResult>> by_variant;
};

ToyRuns& toy_runs(const std::set<std::string>& variants) {
  static ToyRuns runs;
  static std::vector<Sample> train_set, eval_set;
  if (train_set.empty()) {
    const std::vector<Sample> all = synth_dataset(RunConfig::defaults().synth);
    train_set.assign(all.begin(), all.begin() + 200);
    eval_set.assign(all.begin() + 200, all.end());
  }
  for (const std::string& v : variants) {
    if (runs.by_variant.count(v)) continue;
    for (uint64_t seed = 0; seed < 3; ++seed) {
      RunConfig cfg = RunConfig::defaults();
      cfg.train.seed = seed;
      cfg.net.use_sac = v != "fpn";
      cfg.net.sac.rounds = v == "sac-1round" ? 1 : 2;
      ExperimentResult r = run_experiment(cfg, train_set, eval_set, v);
      std::fprintf(stderr, "  %s seed %llu: loss %.1f -> %.1f, eval max-F %.4f, %.0f s\n",
                   v.c_str(), static_cast<unsigned long long>(seed), r.initial_loss,
                   r.final_loss, r.eval.fbeta_max, r.seconds);
      runs.by_variant[v].push_back(std::move(r));
    }
  }
  return runs;
}

double total_seconds(const std::vector<ExperimentResult>& rs) {
  double s = 0;
  for (const auto& r : rs) s += r.seconds;
  return s;
}

Outcome toy_training() {
  ToyRuns& runs = toy_runs({"sac", "fpn"});
  const auto& sac = runs.by_variant["sac"];
  const auto& fpn = runs.by_variant["fpn"];
  Outcome o;
  int converged = 0, wins = 0;
  std::string ratios, scores;
  for (size_t i = 0; i < 3; ++i) {
    const double ratio = sac[i].final_loss / sac[i].initial_loss;
    converged += ratio < 0.3 ? 1 : 0;
    wins += sac[i].eval.fbeta_max >= fpn[i].eval.fbeta_max ? 1 : 0;
    ratios += fmt("%s%.3f", i ? "/" : "", ratio);
    scores += fmt("%s%.4f vs %.4f", i ? ", " : "", sac[i].eval.fbeta_max,
                  fpn[i].eval.fbeta_max);
  }
  const double secs = total_seconds(sac) + total_seconds(fpn);
  o.pass = converged == 3 && wins >= 2 && secs < 1800;
  o.detail = fmt("(a) final/initial loss %s, %d/3 seeds < 0.3; (b) max-F SAC vs FPN %s, "
                 "SAC >= FPN in %d/3 seeds (need 2); %.0f s (limit 1800 s)",
                 ratios.c_str(), converged, scores.c_str(), wins, secs);
  return o;
}

Outcome rounds_ablation() {
  ToyRuns& runs = toy_runs({"sac", "sac-1round"});
  const auto& two = runs.by_variant["sac"];
  const auto& one = runs.by_variant["sac-1round"];
  int wins = 0;
  std::string scores;
  for (size_t i = 0; i < 3; ++i) {
    wins += two[i].eval.fbeta_max >= one[i].eval.fbeta_max ? 1 : 0;
    scores += fmt("%s%.4f vs %.4f", i ? ", " : "", two[i].eval.fbeta_max,
                  one[i].eval.fbeta_max);
  }
  // Budget counts both variants as if run on their own.
  const double secs = total_seconds(two) + total_seconds(one);
  return {wins >= 2 && secs < 1800,
          fmt("max-F rounds=2 vs rounds=1 %s, rounds=2 >= rounds=1 in %d/3 seeds (need 2); "
              "%.0f s (limit 1800 s)",
              scores.c_str(), wins, secs)};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome reproducibility() {
  const RunConfig cfg = RunConfig::defaults();
  std::vector<Sample> data = synth_dataset(cfg.synth);
  data.resize(40);
  const fs::path root = fs::temp_directory_path() / "sacnet_acceptance_repro";
  fs::remove_all(root);
  std::vector<TrainResult> results;
  std::vector<std::string> weights;
  for (int run = 0; run < 2; ++run) {
    TrainConfig tc = cfg.train;
    tc.seed = 11;
    tc.optimizer.max_iterations = 300;
    tc.checkpoint_every = 10;
    tc.checkpoint_dir = root / ("run" + std::to_string(run));
    NetWeights w = NetWeights::make(cfg.net, tc.seed);
    results.push_back(train_loop(data, cfg.net, tc, w));
    save_weights(w, cfg.net, tc.checkpoint_dir / "final.sacw");
  }
  bool traces = results[0].trace.size() == results[1].trace.size() &&
                !results[0].trace.empty();
  for (size_t i = 0; traces && i < results[0].trace.size(); ++i) {
    const LossRecord& a = results[0].trace[i];
    const LossRecord& b = results[1].trace[i];
    traces = a.update == b.update && a.loss == b.loss && a.lr == b.lr;
  }
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(root / "run0")) {
    ++files;
    const fs::path twin = root / "run1" / entry.path().filename();
    if (fs::exists(twin) && read_file(entry.path()) == read_file(twin)) ++identical;
  }
  int files1 = static_cast<int>(std::distance(fs::directory_iterator(root / "run1"),
                                              fs::directory_iterator{}));
  fs::remove_all(root);
  return {traces && files > 1 && identical == files && files1 == files,
          fmt("loss traces (%zu updates) %s; %d/%d checkpoint files byte-identical",
              results[0].trace.size(), traces ? "bit-identical" : "differ", identical, files)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"scan-oracle equivalence", scan_oracle},
      {"closed-form limits", closed_form_limits},
      {"gradient suite", gradient_suite},
      {"global-context property", global_context},
      {"softmax/attention invariants", attention_invariants},
      {"metric oracles", metric_oracles},
      {"toy training", toy_training},
      {"rounds ablation direction", rounds_ablation},
      {"reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %s: %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
