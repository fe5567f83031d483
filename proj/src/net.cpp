#include "sacnet/net.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace sacnet {

namespace {
constexpr float kHeadStd = 0.01f;
}  // namespace

bool NetConfig::level_has_sac(int level) const {
  if (!use_sac) return false;
  if (sac_levels.empty()) return true;
  return std::find(sac_levels.begin(), sac_levels.end(), level) !=
         sac_levels.end();
}

SacConfig NetConfig::sac_config() const {
  SacConfig s = sac;
  s.width = width;
  return s;
}

void NetConfig::validate() const {
  if (stages() < 2) {
    throw ConfigError("net.backbone_channels needs at least two stages");
  }
  for (int c : backbone_channels) {
    if (c < 1) throw ConfigError("net.backbone_channels entries must be >= 1");
  }
  if (width < 1) throw ConfigError("net.width must be >= 1");
  const int shrink = 1 << stages();
  if (input_h < shrink || input_w < shrink || input_h % shrink != 0 ||
      input_w % shrink != 0) {
    throw ConfigError("net input " + std::to_string(input_h) + "x" +
                      std::to_string(input_w) + " must be a positive multiple of " +
                      std::to_string(shrink) + " for " +
                      std::to_string(stages()) + " stages");
  }
  for (int l : sac_levels) {
    if (l < 0 || l >= levels()) {
      throw ConfigError("net.sac_levels entry " + std::to_string(l) +
                        " outside 0.." + std::to_string(levels() - 1));
    }
  }
  if (use_sac) sac_config().validate();
}

std::string NetConfig::canonical() const {
  std::ostringstream os;
  os << "input=" << input_h << "x" << input_w << ";backbone=";
  for (int c : backbone_channels) os << c << ",";
  os << ";width=" << width << ";use_sac=" << use_sac << ";sac_levels=";
  for (int l : sac_levels) os << l << ",";
  if (use_sac) {
    const SacConfig s = sac_config();
    os << ";n=" << s.n << ";rounds=" << s.rounds << ";hidden=" << s.hidden()
       << ";gn_groups=" << s.gn_groups << ";directions=";
    for (bool d : s.directions) os << d;
    os << ";uniform_attention=" << s.uniform_attention;
  }
  return os.str();
}

uint64_t NetConfig::hash() const {
  // FNV-1a, 64-bit.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

NetWeights NetWeights::make(const NetConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  NetWeights w;
  int64_t in_c = 3;
  for (int c : cfg.backbone_channels) {
    w.backbone.push_back({ConvLayer::make(in_c, c, 3, 2, rng),
                          NormLayer::make(c, cfg.sac.gn_groups)});
    in_c = c;
  }
  const SacConfig sac = cfg.sac_config();
  for (int l = 0; l < cfg.levels(); ++l) {
    const int stage = cfg.stages() - 1 - l;
    w.lateral.push_back(
        ConvLayer::make(cfg.backbone_channels[stage], cfg.width, 1, 1, rng));
    w.smooth.push_back(ConvLayer::make(cfg.width, cfg.width, 3, 1, rng));
    if (cfg.level_has_sac(l)) {
      w.sac.emplace_back(SacWeights::make(sac, rng));
    } else {
      w.sac.emplace_back(std::nullopt);
    }
    const int head_in = cfg.level_has_sac(l) ? 2 * cfg.width : cfg.width;
    ConvLayer head = ConvLayer::make(head_in, 1, 1, 1, rng);
    // Small heads start every level near p = 0.5.
    const float scale = kHeadStd / std::sqrt(2.0f / static_cast<float>(head_in));
    for (float& v : head.kernel.value.data()) v *= scale;
    w.heads.push_back(std::move(head));
  }
  return w;
}

void NetWeights::visit(const ParamVisitor& fn) {
  for (size_t s = 0; s < backbone.size(); ++s) {
    const std::string p = "backbone" + std::to_string(s);
    fn(p + ".conv.kernel", backbone[s].conv.kernel);
    fn(p + ".conv.bias", backbone[s].conv.bias);
    fn(p + ".norm.gamma", backbone[s].norm.gamma);
    fn(p + ".norm.beta", backbone[s].norm.beta);
  }
  for (size_t l = 0; l < lateral.size(); ++l) {
    const std::string p = "level" + std::to_string(l);
    fn(p + ".lateral.kernel", lateral[l].kernel);
    fn(p + ".lateral.bias", lateral[l].bias);
    fn(p + ".smooth.kernel", smooth[l].kernel);
    fn(p + ".smooth.bias", smooth[l].bias);
    if (sac[l]) sac[l]->visit(fn, p + ".sac");
    fn(p + ".head.kernel", heads[l].kernel);
    fn(p + ".head.bias", heads[l].bias);
  }
}

void NetWeights::zero_grad() {
  visit([](const std::string&, Param& p) { p.zero_grad(); });
}

template <typename T>
BasicNetGraph<T> forward(BasicGraph<T>& g, typename BasicGraph<T>::Var image,
                         const NetConfig& cfg, NetWeights& w) {
  using Var = typename BasicGraph<T>::Var;
  const Shape img = g.value(image).shape();
  if (img.c != 3 || img.h != cfg.input_h || img.w != cfg.input_w) {
    throw ShapeError("net forward: image " + img.str() +
                     " does not match configured input 3x" +
                     std::to_string(cfg.input_h) + "x" +
                     std::to_string(cfg.input_w));
  }
  std::vector<Var> stages;
  Var x = image;
  for (auto& stage : w.backbone) {
    x = g.relu(g.group_norm(g.conv2d(x, stage.conv), stage.norm));
    stages.push_back(x);
  }

  BasicNetGraph<T> out;
  const SacConfig sac = cfg.sac_config();
  Var top{};
  Var merged{};
  for (int l = 0; l < cfg.levels(); ++l) {
    Var c = stages[cfg.stages() - 1 - l];
    const Shape cv = g.value(c).shape();
    Var lateral = g.conv2d(c, w.lateral[l]);
    top = l == 0 ? lateral : g.add(lateral, g.resize(top, cv.h, cv.w));
    Var pyramid = g.conv2d(top, w.smooth[l]);

    Var head_in = pyramid;
    SacTrace trace;
    if (w.sac[l]) {
      Var context = sac_forward(g, pyramid, sac, *w.sac[l], &trace);
      const std::array<Var, 2> parts = {context, pyramid};
      head_in = g.concat(parts);
    }
    out.traces.push_back(std::move(trace));
    Var logits = g.conv2d(head_in, w.heads[l]);
    merged = l == 0 ? logits
                    : g.add(logits, g.resize(merged, cv.h, cv.w));
    out.level_logits.push_back(merged);
  }
  out.saliency = g.resize(g.sigmoid(merged), cfg.input_h, cfg.input_w);
  return out;
}

namespace {

template <typename T>
typename BasicGraph<T>::Var bce_sum(BasicGraph<T>& g,
                                    typename BasicGraph<T>::Var prob,
                                    const Tensor& gt, float eps) {
  const BasicTensor<T>& p = g.value(prob);
  require_same_shape(p.shape(), gt.shape(), "total_loss");
  double total = 0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]),
                                static_cast<double>(eps), 1.0 - eps);
    total -= gt[i] > 0.5f ? std::log(q) : std::log(1.0 - q);
  }
  BasicTensor<T> value({1, 1, 1, 1}, static_cast<T>(total));
  return g.record({prob}, std::move(value), [p, gt, eps](const BasicTensor<T>& cot) {
    BasicTensor<T> dp(p.shape());
    const double c = cot[0];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double q = p[i];
      if (q < eps || q > 1.0 - eps) continue;  // clamped: flat
      dp[i] = static_cast<T>(gt[i] > 0.5f ? -c / q : c / (1.0 - q));
    }
    return std::vector<BasicTensor<T>>{std::move(dp)};
  });
}

}  // namespace

template <typename T>
typename BasicGraph<T>::Var total_loss(
    BasicGraph<T>& g, const std::vector<typename BasicGraph<T>::Var>& level_logits,
    const Tensor& gt, float eps) {
  using Var = typename BasicGraph<T>::Var;
  for (int64_t i = 0; i < gt.numel(); ++i) {
    if (gt[i] != 0.0f && gt[i] != 1.0f) {
      throw DataError("total_loss: ground truth is not binary");
    }
  }
  if (level_logits.empty()) throw ShapeError("total_loss: no predictions");
  Var total{};
  for (size_t l = 0; l < level_logits.size(); ++l) {
    Var prob =
        g.resize(g.sigmoid(level_logits[l]), gt.h(), gt.w());
    Var term = bce_sum<T>(g, prob, gt, eps);
    total = l == 0 ? term : g.add(total, term);
  }
  return total;
}

template BasicNetGraph<float> forward(Graph&, Graph::Var, const NetConfig&,
                                      NetWeights&);
template BasicNetGraph<double> forward(GraphD&, GraphD::Var, const NetConfig&,
                                       NetWeights&);
template Graph::Var total_loss(Graph&, const std::vector<Graph::Var>&,
                               const Tensor&, float);
template GraphD::Var total_loss(GraphD&, const std::vector<GraphD::Var>&,
                                const Tensor&, float);

Prediction predict(const Tensor& image, const NetConfig& cfg, NetWeights& w) {
  Graph g;
  NetGraph ng = forward<float>(g, g.input(image), cfg, w);
  Prediction p;
  for (auto v : ng.level_logits) p.level_logits.push_back(g.value(v));
  p.saliency = g.value(ng.saliency);
  for (auto& t : ng.traces) p.attention.push_back(std::move(t.attention));
  return p;
}

double loss_and_backward(const Tensor& image, const Tensor& gt,
                         const NetConfig& cfg, NetWeights& w) {
  Graph g;
  NetGraph ng = forward<float>(g, g.input(image), cfg, w);
  Graph::Var loss = total_loss<float>(g, ng.level_logits, gt);
  g.backward(loss, Tensor({1, 1, 1, 1}, 1.0f));
  return g.value(loss)[0];
}

namespace {

constexpr char kMagic[4] = {'S', 'A', 'C', 'W'};

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  size_t remaining() const { return data_.size() - pos_; }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    const uint64_t lo = u32();
    const uint64_t hi = u32();
    return lo | (hi << 32);
  }

  std::string_view bytes(size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(size_t n) const {
    if (remaining() < n) throw DataError("weights file truncated");
  }

  std::string_view data_;
  size_t pos_ = 0;
};

uint32_t crc_of(std::string_view bytes) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size())));
}

}  // namespace

void save_weights(NetWeights& w, const NetConfig& cfg,
                  const std::filesystem::path& path) {
  std::string buf(kMagic, 4);
  put_u32(buf, kWeightsVersion);
  put_u64(buf, cfg.hash());
  w.visit([&buf](const std::string& name, Param& p) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    const Shape& s = p.value.shape();
    for (int64_t d : {s.n, s.c, s.h, s.w}) put_u32(buf, static_cast<uint32_t>(d));
    for (float v : p.value.data()) put_u32(buf, std::bit_cast<uint32_t>(v));
  });
  put_u32(buf, crc_of(buf));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write weights to " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing weights to " + path.string());
}

NetWeights load_weights(const NetConfig& cfg,
                        const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (data.size() < 4 || data.compare(0, 4, kMagic, 4) != 0) {
    throw DataError("bad magic bytes" + where);
  }
  if (data.size() < 4 + 4 + 8 + 4) throw DataError("weights file truncated" + where);
  const std::string_view body(data.data(), data.size() - 4);
  Reader tail(std::string_view(data).substr(data.size() - 4));
  if (tail.u32() != crc_of(body)) throw DataError("checksum mismatch" + where);

  Reader r(body);
  r.bytes(4);
  const uint32_t version = r.u32();
  if (version != kWeightsVersion) {
    throw DataError("unsupported weights version " + std::to_string(version) +
                    where);
  }
  const uint64_t hash = r.u64();
  if (hash != cfg.hash()) {
    throw ConfigError("weights were saved for a different network config" +
                      where);
  }
  std::map<std::string, Tensor> records;
  while (r.remaining() > 0) {
    const uint32_t len = r.u32();
    std::string name(r.bytes(len));
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    std::vector<float> values(static_cast<size_t>(s.numel()));
    for (float& v : values) v = std::bit_cast<float>(r.u32());
    records.emplace(std::move(name), Tensor(s, std::move(values)));
  }
  NetWeights w = NetWeights::make(cfg, 0);
  w.visit([&](const std::string& name, Param& p) {
    auto it = records.find(name);
    if (it == records.end()) throw DataError("missing parameter " + name + where);
    require_same_shape(it->second.shape(), p.value.shape(), name.c_str());
    p.value = std::move(it->second);
    p.zero_grad();
    records.erase(it);
  });
  if (!records.empty()) {
    throw DataError("unexpected parameter " + records.begin()->first + where);
  }
  return w;
}

}  // namespace sacnet
