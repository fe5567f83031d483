#ifndef SACNET_CONFIG_HPP_
#define SACNET_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "sacnet/data.hpp"
#include "sacnet/net.hpp"
#include "sacnet/train.hpp"

namespace sacnet {

// Everything a command needs: network, training and synthetic-data
// settings.
struct RunConfig {
  NetConfig net;
  TrainConfig train;
  SynthConfig synth;
  // Optimizer preset the optimizer section started from.
  std::string preset = "adam";

  // The desk-scale defaults: 64x64 input, stages {8, 16, 16, 16}, W = 16,
  // n = 3, Adam preset, 2000 updates.
  static RunConfig defaults();
  void validate() const;
};

// TOML-style text: [section] headers and key = value lines; values are
// integers, floats, true/false, "strings" or [arrays] of those. '#' starts
// a comment. Sections: net, sac, optimizer, train, synth. Unknown sections
// or keys raise ConfigError naming the line. optimizer.preset is applied
// before the other optimizer keys regardless of order.
RunConfig parse_run_config(const std::string& text, const std::string& origin,
                           RunConfig base = RunConfig::defaults());
RunConfig load_run_config(const std::filesystem::path& path);

// Sets one "section.key" from its textual value, as a config line would.
void apply_override(RunConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

// Every field, in a form parse_run_config reads back to the same config.
std::string to_toml(const RunConfig& cfg);

}  // namespace sacnet

#endif  // SACNET_CONFIG_HPP_
