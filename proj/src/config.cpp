#include "sacnet/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "sacnet/error.hpp"

namespace sacnet {

namespace {

struct Value {
  enum Kind { kInt, kFloat, kBool, kString, kArray };
  Kind kind = kInt;
  int64_t i = 0;
  double f = 0;
  bool b = false;
  std::string s;
  std::vector<Value> items;
};

class ValueParser {
 public:
  ValueParser(const std::string& text, const std::string& where)
      : text_(text), where_(where) {}

  Value parse_all() {
    Value v = parse();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return v;
  }

 private:
  Value parse() {
    skip_space();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      Value v;
      v.kind = Value::kBool;
      v.b = true;
      return v;
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      Value v;
      v.kind = Value::kBool;
      return v;
    }
    return parse_number();
  }

  Value parse_string() {
    ++pos_;
    Value v;
    v.kind = Value::kString;
    while (pos_ < text_.size() && text_[pos_] != '"') v.s.push_back(text_[pos_++]);
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return v;
  }

  Value parse_array() {
    ++pos_;
    Value v;
    v.kind = Value::kArray;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      v.items.push_back(parse());
      skip_space();
      if (pos_ >= text_.size()) fail("unterminated array");
      if (text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      if (text_[pos_] != ',') fail("expected ',' or ']' in array");
      ++pos_;
    }
  }

  Value parse_number() {
    const size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.' || text_[pos_] == '-' || text_[pos_] == '+')) {
      ++pos_;
    }
    const std::string token = text_.substr(start, pos_ - start);
    if (token.empty()) fail("expected a value");
    Value v;
    size_t used = 0;
    try {
      if (token.find_first_of(".eE") == std::string::npos) {
        v.kind = Value::kInt;
        v.i = std::stoll(token, &used);
      } else {
        v.kind = Value::kFloat;
        v.f = std::stod(token, &used);
      }
    } catch (const std::exception&) {
      fail("cannot parse '" + token + "'");
    }
    if (used != token.size()) fail("cannot parse '" + token + "'");
    return v;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(where_ + ": " + msg);
  }

  const std::string& text_;
  const std::string& where_;
  size_t pos_ = 0;
};

int64_t as_int(const Value& v, const std::string& key) {
  if (v.kind != Value::kInt) throw ConfigError(key + " must be an integer");
  return v.i;
}

int as_small_int(const Value& v, const std::string& key) {
  const int64_t i = as_int(v, key);
  if (i < -(1 << 30) || i > (1 << 30)) throw ConfigError(key + " is out of range");
  return static_cast<int>(i);
}

double as_double(const Value& v, const std::string& key) {
  if (v.kind == Value::kInt) return static_cast<double>(v.i);
  if (v.kind != Value::kFloat) throw ConfigError(key + " must be a number");
  return v.f;
}

bool as_bool(const Value& v, const std::string& key) {
  if (v.kind != Value::kBool) throw ConfigError(key + " must be true or false");
  return v.b;
}

std::string as_string(const Value& v, const std::string& key) {
  if (v.kind != Value::kString) throw ConfigError(key + " must be a quoted string");
  return v.s;
}

std::vector<int> as_int_list(const Value& v, const std::string& key) {
  if (v.kind != Value::kArray) throw ConfigError(key + " must be an array of integers");
  std::vector<int> out;
  for (const auto& item : v.items) out.push_back(as_small_int(item, key));
  return out;
}

using Setter = std::function<void(RunConfig&, const Value&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"net.input_h", [](RunConfig& c, const Value& v, const std::string& k) { c.net.input_h = as_small_int(v, k); }},
      {"net.input_w", [](RunConfig& c, const Value& v, const std::string& k) { c.net.input_w = as_small_int(v, k); }},
      {"net.backbone_channels", [](RunConfig& c, const Value& v, const std::string& k) { c.net.backbone_channels = as_int_list(v, k); }},
      {"net.width", [](RunConfig& c, const Value& v, const std::string& k) { c.net.width = as_small_int(v, k); }},
      {"net.use_sac", [](RunConfig& c, const Value& v, const std::string& k) { c.net.use_sac = as_bool(v, k); }},
      {"net.sac_levels", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac_levels = as_int_list(v, k); }},
      {"sac.n", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.n = as_small_int(v, k); }},
      {"sac.rounds", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.rounds = as_small_int(v, k); }},
      {"sac.attention_hidden", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.attention_hidden = as_small_int(v, k); }},
      {"sac.gn_groups", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.gn_groups = as_small_int(v, k); }},
      {"sac.directions", [](RunConfig& c, const Value& v, const std::string& k) {
         if (v.kind != Value::kArray) throw ConfigError(k + " must be an array of direction names");
         std::array<bool, 4> on = {false, false, false, false};
         for (const auto& item : v.items) {
           const std::string name = as_string(item, k);
           bool found = false;
           for (Direction d : kAllDirections) {
             if (to_string(d) == name) {
               on[static_cast<int>(d)] = true;
               found = true;
             }
           }
           if (!found) throw ConfigError(k + ": unknown direction '" + name + "'");
         }
         c.net.sac.directions = on;
       }},
      {"sac.uniform_attention", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.uniform_attention = as_bool(v, k); }},
      {"sac.beta_init", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.beta_init = static_cast<float>(as_double(v, k)); }},
      {"sac.beta_learnable", [](RunConfig& c, const Value& v, const std::string& k) { c.net.sac.beta_learnable = as_bool(v, k); }},
      {"optimizer.preset", [](RunConfig& c, const Value& v, const std::string& k) {
         c.preset = as_string(v, k);
         c.train.optimizer = OptimizerConfig::preset(c.preset);
       }},
      {"optimizer.lr", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.lr = as_double(v, k); }},
      {"optimizer.weight_decay", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.weight_decay = as_double(v, k); }},
      {"optimizer.momentum", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.momentum = as_double(v, k); }},
      {"optimizer.beta1", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.beta1 = as_double(v, k); }},
      {"optimizer.beta2", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.beta2 = as_double(v, k); }},
      {"optimizer.epsilon", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.epsilon = as_double(v, k); }},
      {"optimizer.lr_drop_iteration", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.lr_drop_iteration = as_int(v, k); }},
      {"optimizer.lr_drop_factor", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.lr_drop_factor = as_double(v, k); }},
      {"optimizer.max_iterations", [](RunConfig& c, const Value& v, const std::string& k) { c.train.optimizer.max_iterations = as_int(v, k); }},
      {"train.accumulation", [](RunConfig& c, const Value& v, const std::string& k) { c.train.accumulation = as_small_int(v, k); }},
      {"train.flip", [](RunConfig& c, const Value& v, const std::string& k) { c.train.flip = as_bool(v, k); }},
      {"train.seed", [](RunConfig& c, const Value& v, const std::string& k) { c.train.seed = static_cast<uint64_t>(as_int(v, k)); }},
      {"train.checkpoint_every", [](RunConfig& c, const Value& v, const std::string& k) { c.train.checkpoint_every = as_int(v, k); }},
      {"synth.size", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.size = as_small_int(v, k); }},
      {"synth.count", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.count = as_small_int(v, k); }},
      {"synth.seed", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.seed = static_cast<uint64_t>(as_int(v, k)); }},
      {"synth.max_shapes", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.max_shapes = as_small_int(v, k); }},
      {"synth.octaves", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.octaves = as_small_int(v, k); }},
      {"synth.texture_amplitude", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.texture_amplitude = as_double(v, k); }},
      {"synth.min_contrast", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.min_contrast = as_double(v, k); }},
      {"synth.max_contrast", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.max_contrast = as_double(v, k); }},
      {"synth.min_fraction", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.min_fraction = as_double(v, k); }},
      {"synth.max_fraction", [](RunConfig& c, const Value& v, const std::string& k) { c.synth.max_fraction = as_double(v, k); }},
  };
  return table;
}

void set_value(RunConfig& cfg, const std::string& key, const Value& v,
               const std::string& where) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(where + ": unknown key '" + key + "'");
  try {
    it->second(cfg, v, key);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.net.backbone_channels = {8, 16, 16, 16};
  c.net.width = 16;
  c.net.sac.n = 3;
  c.train.optimizer = OptimizerConfig::preset("adam");
  c.train.optimizer.max_iterations = 20000;
  return c;
}

void RunConfig::validate() const {
  net.validate();
  train.validate();
  synth.validate();
}

RunConfig parse_run_config(const std::string& text, const std::string& origin,
                           RunConfig base) {
  struct Entry {
    std::string key;
    Value value;
    std::string where;
  };
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number);
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      if (section != "net" && section != "sac" && section != "optimizer" &&
          section != "train" && section != "synth") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const size_t eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    const std::string key = section + "." + trim(body.substr(0, eq));
    const std::string raw = trim(body.substr(eq + 1));
    entries.push_back({key, ValueParser(raw, where).parse_all(), where});
  }
  // The preset resets every optimizer field, so it goes first.
  for (const auto& e : entries) {
    if (e.key == "optimizer.preset") set_value(base, e.key, e.value, e.where);
  }
  for (const auto& e : entries) {
    if (e.key != "optimizer.preset") set_value(base, e.key, e.value, e.where);
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const std::string where = "override " + dotted_key;
  set_value(cfg, dotted_key, ValueParser(value, where).parse_all(), where);
}

std::string to_toml(const RunConfig& c) {
  std::ostringstream o;
  o << "[net]\n"
    << "input_h = " << c.net.input_h << "\n"
    << "input_w = " << c.net.input_w << "\n"
    << "backbone_channels = " << fmt_list(c.net.backbone_channels) << "\n"
    << "width = " << c.net.width << "\n"
    << "use_sac = " << fmt_bool(c.net.use_sac) << "\n"
    << "sac_levels = " << fmt_list(c.net.sac_levels) << "\n\n";
  o << "[sac]\n"
    << "n = " << c.net.sac.n << "\n"
    << "rounds = " << c.net.sac.rounds << "\n"
    << "attention_hidden = " << c.net.sac.attention_hidden << "\n"
    << "gn_groups = " << c.net.sac.gn_groups << "\n"
    << "directions = [";
  bool first = true;
  for (Direction d : kAllDirections) {
    if (!c.net.sac.directions[static_cast<int>(d)]) continue;
    o << (first ? "" : ", ") << '"' << to_string(d) << '"';
    first = false;
  }
  o << "]\n"
    << "uniform_attention = " << fmt_bool(c.net.sac.uniform_attention) << "\n"
    << "beta_init = " << fmt_double(c.net.sac.beta_init) << "\n"
    << "beta_learnable = " << fmt_bool(c.net.sac.beta_learnable) << "\n\n";
  const OptimizerConfig& op = c.train.optimizer;
  o << "[optimizer]\n"
    << "preset = \"" << c.preset << "\"\n"
    << "lr = " << fmt_double(op.lr) << "\n"
    << "weight_decay = " << fmt_double(op.weight_decay) << "\n"
    << "momentum = " << fmt_double(op.momentum) << "\n"
    << "beta1 = " << fmt_double(op.beta1) << "\n"
    << "beta2 = " << fmt_double(op.beta2) << "\n"
    << "epsilon = " << fmt_double(op.epsilon) << "\n"
    << "lr_drop_iteration = " << op.lr_drop_iteration << "\n"
    << "lr_drop_factor = " << fmt_double(op.lr_drop_factor) << "\n"
    << "max_iterations = " << op.max_iterations << "\n\n";
  o << "[train]\n"
    << "accumulation = " << c.train.accumulation << "\n"
    << "flip = " << fmt_bool(c.train.flip) << "\n"
    << "seed = " << c.train.seed << "\n"
    << "checkpoint_every = " << c.train.checkpoint_every << "\n\n";
  o << "[synth]\n"
    << "size = " << c.synth.size << "\n"
    << "count = " << c.synth.count << "\n"
    << "seed = " << c.synth.seed << "\n"
    << "max_shapes = " << c.synth.max_shapes << "\n"
    << "octaves = " << c.synth.octaves << "\n"
    << "texture_amplitude = " << fmt_double(c.synth.texture_amplitude) << "\n"
    << "min_contrast = " << fmt_double(c.synth.min_contrast) << "\n"
    << "max_contrast = " << fmt_double(c.synth.max_contrast) << "\n"
    << "min_fraction = " << fmt_double(c.synth.min_fraction) << "\n"
    << "max_fraction = " << fmt_double(c.synth.max_fraction) << "\n";
  return o.str();
}

}  // namespace sacnet
