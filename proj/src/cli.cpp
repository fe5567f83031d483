#include "sacnet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "sacnet/config.hpp"
#include "sacnet/error.hpp"
#include "sacnet/experiment.hpp"
#include "sacnet/gradient_suite.hpp"
#include "sacnet/parallel.hpp"

namespace sacnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kResolvedName[] = "config.resolved.toml";

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

// Options shared by commands that build a RunConfig.
struct ConfigOptions {
  std::string config;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "TOML-style run config");
    cmd->add_option("--set", overrides, "Override one setting, e.g. sac.rounds=1")
        ->take_all();
  }

  // A preset named on the command line replaces the file's optimizer
  // section; --set values still apply on top.
  RunConfig resolve(const std::string& preset = "") const {
    RunConfig c = config.empty() ? RunConfig::defaults() : load_run_config(config);
    if (!preset.empty()) {
      c.train.optimizer = OptimizerConfig::preset(preset);
      c.preset = preset;
    }
    for (const auto& kv : overrides) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects section.key=value, got '" + kv + "'");
      }
      apply_override(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
  }
};

// Files with the given extension in dir, or in dir/sub when present, keyed
// by file stem.
std::map<std::string, fs::path> list_files(const fs::path& dir,
                                           const std::string& sub,
                                           const std::string& ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  const fs::path root = fs::is_directory(dir / sub) ? dir / sub : dir;
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ext) {
      out[e.path().stem().string()] = e.path();
    }
  }
  if (out.empty()) throw DataError("no " + ext + " files in " + root.string());
  return out;
}

NetConfig config_for_weights(const std::string& config, const fs::path& weights) {
  if (!config.empty()) return load_run_config(config).net;
  const fs::path beside = weights.parent_path() / kResolvedName;
  if (fs::exists(beside)) return load_run_config(beside).net;
  throw ConfigError("no --config given and no " + std::string(kResolvedName) +
                    " next to " + weights.string());
}

struct Outcome {
  int code = kExitOk;
  json status = json::object();
};

Outcome cmd_train(const ConfigOptions& co, const std::string& data,
                  const std::string& out_dir, const int64_t* seed,
                  const std::string& optimizer, std::ostream& out) {
  RunConfig cfg = co.resolve(optimizer);
  if (seed) cfg.train.seed = static_cast<uint64_t>(*seed);
  const fs::path out_path(out_dir);
  if (cfg.train.checkpoint_every > 0) cfg.train.checkpoint_dir = out_path / "checkpoints";
  cfg.validate();
  const std::vector<Sample> samples = load_dataset(data);
  write_text(out_path / kResolvedName, to_toml(cfg));

  NetWeights w = NetWeights::make(cfg.net, cfg.train.seed);
  const int64_t total = cfg.train.optimizer.max_iterations / cfg.train.accumulation;
  const int64_t every = std::max<int64_t>(1, total / 20);
  TrainResult r = train_loop(samples, cfg.net, cfg.train, w, [&](const LossRecord& rec) {
    if ((rec.update + 1) % every == 0 || rec.update + 1 == total) {
      char line[128];
      std::snprintf(line, sizeof(line), "update %lld/%lld loss %.4f lr %.3g\n",
                    static_cast<long long>(rec.update + 1),
                    static_cast<long long>(total), rec.loss, rec.lr);
      out << line << std::flush;
    }
  });
  write_text(out_path / "loss.csv", loss_trace_csv(r.trace));
  save_weights(w, cfg.net, out_path / "weights.sacw");
  Outcome o;
  o.status["updates"] = r.updates;
  o.status["iterations"] = r.iterations;
  o.status["initial_loss"] = mean_loss(r.trace, 0, 10);
  o.status["final_loss"] = mean_loss(r.trace, r.trace.size() > 10 ? r.trace.size() - 10 : 0,
                                     r.trace.size());
  o.status["weights"] = (out_path / "weights.sacw").string();
  return o;
}

Outcome cmd_infer(const std::string& config, const std::string& weights,
                  const std::string& input, const std::string& out_dir,
                  bool dump_attention, std::ostream& out) {
  const NetConfig cfg = config_for_weights(config, weights);
  NetWeights w = load_weights(cfg, weights);
  const auto images = list_files(input, "images", ".ppm");
  const fs::path out_path(out_dir);
  fs::create_directories(out_path);
  int64_t maps = 0;
  for (const auto& [id, path] : images) {
    const Tensor image = load_image(path);
    if (image.h() != cfg.input_h || image.w() != cfg.input_w) {
      throw DataError(path.string() + ": image is " + std::to_string(image.w()) + "x" +
                      std::to_string(image.h()) + ", network expects " +
                      std::to_string(cfg.input_w) + "x" + std::to_string(cfg.input_h));
    }
    const Prediction p = predict(image, cfg, w);
    save_gray(out_path / (id + ".pgm"), p.saliency);
    if (!dump_attention) continue;
    for (size_t l = 0; l < p.attention.size(); ++l) {
      for (size_t r = 0; r < p.attention[l].size(); ++r) {
        const Tensor& a = p.attention[l][r];
        for (int64_t k = 0; k < a.c(); ++k) {
          char name[64];
          std::snprintf(name, sizeof(name), "level%zu_round%zu_k%lld.pgm", l, r,
                        static_cast<long long>(k));
          save_gray(out_path / "attention" / id / name, slice_channels(a, k, 1));
          ++maps;
        }
      }
    }
  }
  out << "wrote " << images.size() << " saliency maps to " << out_path.string() << "\n";
  Outcome o;
  o.status["images"] = images.size();
  o.status["attention_maps"] = maps;
  return o;
}

Outcome cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
                 const std::string& out_dir, std::ostream& out) {
  const auto preds = list_files(pred_dir, "masks", ".pgm");
  const auto gts = list_files(gt_dir, "masks", ".pgm");
  std::vector<std::string> unmatched;
  for (const auto& [id, p] : preds) {
    if (!gts.count(id)) unmatched.push_back(id + " (no ground truth)");
  }
  for (const auto& [id, p] : gts) {
    if (!preds.count(id)) unmatched.push_back(id + " (no prediction)");
  }
  if (!unmatched.empty()) {
    std::string msg = "unmatched ids:";
    for (const auto& u : unmatched) msg += " " + u;
    throw DataError(msg);
  }
  std::vector<EvalItem> items;
  for (const auto& [id, p] : preds) {
    items.push_back({id, load_gray(p), load_mask(gts.at(id))});
  }
  const EvalReport report = evaluate(items);
  const fs::path out_path(out_dir);
  write_text(out_path / "report.csv", report.csv());
  write_text(out_path / "report.json", report.summary_json() + "\n");
  char line[256];
  std::snprintf(line, sizeof(line),
                "images %zu  maxF %.4f  adaptiveF %.4f  S %.4f  MAE %.4f  BER %.2f\n",
                report.images.size(), report.fbeta_max, report.fbeta_adaptive,
                report.smeasure, report.mae, report.ber);
  out << line;
  Outcome o;
  o.status["images"] = report.images.size();
  o.status["fbeta_max"] = report.fbeta_max;
  o.status["fbeta_adaptive"] = report.fbeta_adaptive;
  o.status["smeasure"] = report.smeasure;
  o.status["mae"] = report.mae;
  o.status["ber"] = report.ber;
  o.status["fbeta_undefined_images"] = report.f_undefined;
  return o;
}

Outcome cmd_gradcheck(const std::string& scope, int64_t seed, int seeds,
                      std::ostream& out, std::ostream& err) {
  GradCheckReport (*check)(uint64_t) = nullptr;
  if (scope == "scan") check = check_scan;
  if (scope == "attention") check = check_attention;
  if (scope == "sac") check = check_sac;
  if (scope == "net") check = check_micro_net;
  if (!check) throw ConfigError("unknown --scope '" + scope + "'");
  Outcome o;
  double worst = 0;
  std::string worst_name;
  bool passed = true;
  double tolerance = 0;
  for (int s = 0; s < seeds; ++s) {
    const GradCheckReport r = check(static_cast<uint64_t>(seed + s));
    tolerance = r.tolerance;
    out << "seed " << seed + s << (r.passed ? "  ok" : "  FAILED") << "\n";
    for (const auto& g : r.groups) {
      char line[256];
      std::snprintf(line, sizeof(line), "  %-40s max_rel_error %.3e  checked %lld  kinks %lld\n",
                    g.name.c_str(), g.max_rel_error, static_cast<long long>(g.checked),
                    static_cast<long long>(g.kinks));
      out << line;
      if (g.max_rel_error > worst) {
        worst = g.max_rel_error;
        worst_name = g.name + " (seed " + std::to_string(seed + s) + ")";
      }
    }
    if (!r.passed) {
      passed = false;
      err << r.summary() << "\n";
    }
  }
  o.status["scope"] = scope;
  o.status["max_rel_error"] = worst;
  o.status["tolerance"] = tolerance;
  o.status["worst_group"] = worst_name;
  if (!passed) {
    err << "gradient check failed; worst offender " << worst_name << " with relative error "
        << worst << "\n";
    o.code = kExitCheckFailed;
  }
  return o;
}

Outcome cmd_ablate(const ConfigOptions& co, const std::string& axis,
                   const std::string& data, const std::string& out_dir,
                   int64_t seed, int seeds, int eval_count, std::ostream& out) {
  RunConfig base = co.resolve();
  const auto variants = ablation_variants(base, axis);
  for (const auto& v : variants) v.second.validate();
  const std::vector<Sample> samples = load_dataset(data);
  const int n = static_cast<int>(samples.size());
  const int held = eval_count > 0 ? eval_count : n / 5;
  if (held < 1 || held >= n) {
    throw DataError("dataset of " + std::to_string(n) + " samples cannot hold out " +
                    std::to_string(held) + " for evaluation");
  }
  const std::vector<Sample> train_set(samples.begin(), samples.end() - held);
  const std::vector<Sample> eval_set(samples.end() - held, samples.end());
  const fs::path out_path(out_dir);
  write_text(out_path / kResolvedName, to_toml(base));

  std::vector<ExperimentResult> results;
  for (int s = 0; s < seeds; ++s) {
    for (const auto& [label, cfg] : variants) {
      RunConfig c = cfg;
      c.train.seed = static_cast<uint64_t>(seed + s);
      results.push_back(run_experiment(c, train_set, eval_set, label));
      const auto& r = results.back();
      char line[256];
      std::snprintf(line, sizeof(line), "%-14s seed %lld  loss %.1f -> %.1f  maxF %.4f  %.0fs\n",
                    label.c_str(), static_cast<long long>(c.train.seed), r.initial_loss,
                    r.final_loss, r.eval.fbeta_max, r.seconds);
      out << line << std::flush;
    }
  }
  write_text(out_path / "ablation.csv", ablation_csv(results));
  Outcome o;
  o.status["axis"] = axis;
  o.status["runs"] = results.size();
  o.status["table"] = (out_path / "ablation.csv").string();
  return o;
}

Outcome cmd_synth(const ConfigOptions& co, const std::string& out_dir,
                  const int64_t* count, const int64_t* size, const int64_t* seed,
                  std::ostream& out) {
  RunConfig cfg = co.resolve();
  if (count) cfg.synth.count = static_cast<int>(*count);
  if (size) cfg.synth.size = static_cast<int>(*size);
  if (seed) cfg.synth.seed = static_cast<uint64_t>(*seed);
  cfg.synth.validate();
  save_dataset(out_dir, synth_dataset(cfg.synth));
  out << "wrote " << cfg.synth.count << " samples to " << out_dir << "\n";
  Outcome o;
  o.status["samples"] = cfg.synth.count;
  return o;
}

int threads_from_env() {
  const char* env = std::getenv("SACNET_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("SACNET_THREADS must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Spatial attenuation context saliency network", "sacnet"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker lanes (default: SACNET_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  ConfigOptions train_co, ablate_co, synth_co;
  std::string data, out_dir, optimizer;
  int64_t seed_value = 0, count_value = 0, size_value = 0;
  CLI::App* train = app.add_subcommand("train", "Train a network on a dataset");
  train_co.add_to(train);
  train->add_option("--data", data, "Dataset root")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  CLI::Option* train_seed = train->add_option("--seed", seed_value, "Training seed");
  train->add_option("--optimizer", optimizer, "Optimizer preset")
      ->check(CLI::IsMember({"sgd", "adam", "paper-sgd", "paper-adam"}));

  std::string infer_config, weights, input;
  bool dump_attention = false;
  CLI::App* infer = app.add_subcommand("infer", "Predict saliency maps");
  infer->add_option("--config", infer_config, "Run config (default: next to weights)");
  infer->add_option("--weights", weights, "Weight file")->required();
  infer->add_option("--input", input, "Directory of PPM images")->required();
  infer->add_option("--out", out_dir, "Output directory")->required();
  infer->add_flag("--dump-attention", dump_attention, "Also write attention maps");

  std::string pred_dir, gt_dir;
  CLI::App* eval = app.add_subcommand("eval", "Score saliency maps");
  eval->add_option("--pred", pred_dir, "Directory of predicted PGM maps")->required();
  eval->add_option("--gt", gt_dir, "Directory of PGM masks")->required();
  eval->add_option("--out", out_dir, "Report directory")->required();

  std::string scope;
  int seeds = 1;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--scope", scope, "scan, attention, sac or net")
      ->required()
      ->check(CLI::IsMember({"scan", "attention", "sac", "net"}));
  gradcheck->add_option("--seed", seed_value, "First seed");
  gradcheck->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);

  std::string axis;
  int eval_count = 0;
  CLI::App* ablate = app.add_subcommand("ablate", "Train variants along one axis");
  ablate_co.add_to(ablate);
  ablate->add_option("--axis", axis, "n, beta, rounds, directions or attention")
      ->required()
      ->check(CLI::IsMember({"n", "beta", "rounds", "directions", "attention"}));
  ablate->add_option("--data", data, "Dataset root")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--seed", seed_value, "First seed");
  ablate->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  ablate->add_option("--eval-count", eval_count,
                     "Samples held out at the end of the dataset (default 20%)");

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_co.add_to(synth);
  synth->add_option("--out", out_dir, "Dataset root")->required();
  CLI::Option* synth_count = synth->add_option("--count", count_value, "Samples");
  CLI::Option* synth_size = synth->add_option("--size", size_value, "Image side");
  CLI::Option* synth_seed = synth->add_option("--seed", seed_value, "Generator seed");

  std::string command = "sacnet";
  auto status_line = [&](int code, json status, const std::string& error) {
    status["command"] = command;
    status["exit_code"] = code;
    status["status"] = code == kExitOk ? "ok" : "error";
    if (!error.empty()) status["error"] = error;
    out << status.dump() << "\n";
    return code;
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return status_line(kExitOk, json::object(), "");
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return status_line(kExitConfig, json::object(), e.what());
  }
  for (CLI::App* sub : app.get_subcommands()) command = sub->get_name();

  try {
    set_num_threads(threads > 0 ? threads : threads_from_env());
    Outcome o;
    if (*train) {
      o = cmd_train(train_co, data, out_dir, train_seed->count() ? &seed_value : nullptr,
                    optimizer, out);
    } else if (*infer) {
      o = cmd_infer(infer_config, weights, input, out_dir, dump_attention, out);
    } else if (*eval) {
      o = cmd_eval(pred_dir, gt_dir, out_dir, out);
    } else if (*gradcheck) {
      o = cmd_gradcheck(scope, seed_value, seeds, out, err);
    } else if (*ablate) {
      o = cmd_ablate(ablate_co, axis, data, out_dir, seed_value, seeds, eval_count, out);
    } else if (*synth) {
      o = cmd_synth(synth_co, out_dir, synth_count->count() ? &count_value : nullptr,
                    synth_size->count() ? &size_value : nullptr,
                    synth_seed->count() ? &seed_value : nullptr, out);
    }
    return status_line(o.code, o.status, "");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return status_line(kExitConfig, json::object(), e.what());
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return status_line(kExitData, json::object(), e.what());
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return status_line(kExitData, json::object(), e.what());
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return status_line(kExitNumeric, json::object(), e.what());
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return status_line(kExitData, json::object(), e.what());
  }
}

}  // namespace sacnet
