#include "sacnet/sac.hpp"

#include <memory>
#include <string>

namespace sacnet {

std::vector<Direction> SacConfig::active_directions() const {
  std::vector<Direction> out;
  for (Direction d : kAllDirections) {
    if (directions[static_cast<size_t>(d)]) out.push_back(d);
  }
  return out;
}

int SacConfig::fused_channels() const {
  return static_cast<int>(active_directions().size()) * n * per_map();
}

void SacConfig::validate() const {
  if (n < 1) throw ConfigError("sac.n must be >= 1");
  if (rounds < 1) throw ConfigError("sac.rounds must be >= 1");
  if (width < 1 || per_map() < 1) {
    throw ConfigError("sac width " + std::to_string(width) +
                      " leaves no channels for n = " + std::to_string(n));
  }
  if (active_directions().empty()) {
    throw ConfigError("sac.directions must enable at least one direction");
  }
  if (attention_hidden < 0 || gn_groups < 0) {
    throw ConfigError("sac.attention_hidden and sac.gn_groups must be >= 0");
  }
}

AttentionWeights AttentionWeights::make(int64_t in_c, int hidden, int n,
                                        int gn_groups, Rng& rng) {
  AttentionWeights w;
  w.conv1 = ConvLayer::make(in_c, hidden, 3, 1, rng);
  w.norm1 = NormLayer::make(hidden, gn_groups);
  w.conv2 = ConvLayer::make(hidden, hidden, 3, 1, rng);
  w.norm2 = NormLayer::make(hidden, gn_groups);
  w.logits = ConvLayer::make(hidden, n, 1, 1, rng);
  return w;
}

namespace {

void visit_conv(ConvLayer& c, const ParamVisitor& fn, const std::string& p) {
  fn(p + ".kernel", c.kernel);
  fn(p + ".bias", c.bias);
}

void visit_norm(NormLayer& c, const ParamVisitor& fn, const std::string& p) {
  fn(p + ".gamma", c.gamma);
  fn(p + ".beta", c.beta);
}

}  // namespace

void AttentionWeights::visit(const ParamVisitor& fn,
                             const std::string& prefix) {
  visit_conv(conv1, fn, prefix + ".conv1");
  visit_norm(norm1, fn, prefix + ".norm1");
  visit_conv(conv2, fn, prefix + ".conv2");
  visit_norm(norm2, fn, prefix + ".norm2");
  visit_conv(logits, fn, prefix + ".logits");
}

SacWeights SacWeights::make(const SacConfig& cfg, Rng& rng) {
  cfg.validate();
  const int m = cfg.per_map();
  const auto dirs = cfg.active_directions();
  SacWeights w;
  w.entry = ConvLayer::make(cfg.width, m, 1, 1, rng);
  for (int r = 0; r < cfg.rounds; ++r) {
    SacRoundWeights round;
    round.attention =
        AttentionWeights::make(cfg.width, cfg.hidden(), cfg.n, cfg.gn_groups, rng);
    for (int k = 0; k < cfg.n; ++k) {
      for (size_t d = 0; d < dirs.size(); ++d) {
        Param beta(Tensor({1, m, 1, 1}, cfg.beta_init), true);
        beta.trainable = cfg.beta_learnable;
        round.betas.push_back(std::move(beta));
      }
    }
    if (r + 1 < cfg.rounds) {
      round.reduce = ConvLayer::make(cfg.fused_channels(), m, 1, 1, rng);
    }
    w.rounds.push_back(std::move(round));
  }
  w.exit = ConvLayer::make(cfg.fused_channels(), cfg.width, 1, 1, rng);
  w.exit_norm = NormLayer::make(cfg.width, cfg.gn_groups);
  return w;
}

void SacWeights::visit(const ParamVisitor& fn, const std::string& prefix) {
  visit_conv(entry, fn, prefix + ".entry");
  for (size_t r = 0; r < rounds.size(); ++r) {
    const std::string rp = prefix + ".round" + std::to_string(r);
    rounds[r].attention.visit(fn, rp + ".attention");
    for (size_t i = 0; i < rounds[r].betas.size(); ++i) {
      fn(rp + ".beta" + std::to_string(i), rounds[r].betas[i]);
    }
    if (rounds[r].reduce) visit_conv(*rounds[r].reduce, fn, rp + ".reduce");
  }
  visit_conv(exit, fn, prefix + ".exit");
  visit_norm(exit_norm, fn, prefix + ".exit_norm");
}

template <typename T>
ops::WithVjp<T, FuseGrads<T>> fuse_round(std::span<const BasicTensor<T>> scans,
                                         const BasicTensor<T>& weights) {
  const int64_t n = weights.c();
  if (n < 1 || scans.empty() || static_cast<int64_t>(scans.size()) % n != 0) {
    throw ShapeError("fuse_round: " + std::to_string(scans.size()) +
                     " scan maps cannot be split into " + std::to_string(n) +
                     " factor blocks");
  }
  const Shape s = scans.front().shape();
  for (const auto& m : scans) require_same_shape(m.shape(), s, "fuse_round");
  if (weights.n() != s.n || weights.h() != s.h || weights.w() != s.w) {
    throw ShapeError("fuse_round: weights " + weights.shape().str() +
                     " do not match scans " + s.str());
  }
  const int64_t per_block = static_cast<int64_t>(scans.size()) / n;
  const int64_t hw = s.plane();
  BasicTensor<T> out({s.n, s.c * static_cast<int64_t>(scans.size()), s.h, s.w});
  for (int64_t b = 0; b < s.n; ++b) {
    for (size_t idx = 0; idx < scans.size(); ++idx) {
      const T* wk = weights.plane(b, static_cast<int64_t>(idx) / per_block);
      for (int64_t c = 0; c < s.c; ++c) {
        const T* src = scans[idx].plane(b, c);
        T* dst = out.plane(b, static_cast<int64_t>(idx) * s.c + c);
        for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] * wk[i];
      }
    }
  }
  std::vector<BasicTensor<T>> saved(scans.begin(), scans.end());
  auto vjp = [saved = std::move(saved), weights, per_block](
                 const BasicTensor<T>& cot) {
    const Shape s = saved.front().shape();
    const int64_t hw = s.plane();
    FuseGrads<T> g;
    g.weights = BasicTensor<T>(weights.shape());
    for (size_t idx = 0; idx < saved.size(); ++idx) {
      BasicTensor<T> d(s);
      const int64_t k = static_cast<int64_t>(idx) / per_block;
      for (int64_t b = 0; b < s.n; ++b) {
        const T* wk = weights.plane(b, k);
        T* dw = g.weights.plane(b, k);
        for (int64_t c = 0; c < s.c; ++c) {
          const T* src = saved[idx].plane(b, c);
          const T* ct = cot.plane(b, static_cast<int64_t>(idx) * s.c + c);
          T* dst = d.plane(b, c);
          for (int64_t i = 0; i < hw; ++i) {
            dst[i] = ct[i] * wk[i];
            dw[i] += ct[i] * src[i];
          }
        }
      }
      g.scans.push_back(std::move(d));
    }
    return g;
  };
  return {std::move(out), std::move(vjp)};
}

template ops::WithVjp<float, FuseGrads<float>> fuse_round(
    std::span<const BasicTensor<float>>, const BasicTensor<float>&);
template ops::WithVjp<double, FuseGrads<double>> fuse_round(
    std::span<const BasicTensor<double>>, const BasicTensor<double>&);

template <typename T>
typename BasicGraph<T>::Var attention_weights(
    BasicGraph<T>& g, typename BasicGraph<T>::Var features,
    AttentionWeights& w) {
  auto h = g.relu(g.group_norm(g.conv2d(features, w.conv1), w.norm1));
  h = g.relu(g.group_norm(g.conv2d(h, w.conv2), w.norm2));
  return g.softmax_over_factors(g.conv2d(h, w.logits));
}

template <typename T>
typename BasicGraph<T>::Var fuse_round(
    BasicGraph<T>& g, std::span<const typename BasicGraph<T>::Var> scans,
    typename BasicGraph<T>::Var weights) {
  using Var = typename BasicGraph<T>::Var;
  std::vector<BasicTensor<T>> values;
  values.reserve(scans.size());
  for (Var v : scans) values.push_back(g.value(v));
  auto r = fuse_round<T>(values, g.value(weights));
  std::vector<Var> inputs(scans.begin(), scans.end());
  inputs.push_back(weights);
  return g.record(std::move(inputs), std::move(r.out),
                  [vjp = std::move(r.vjp)](const BasicTensor<T>& cot) {
                    FuseGrads<T> fg = vjp(cot);
                    std::vector<BasicTensor<T>> out = std::move(fg.scans);
                    out.push_back(std::move(fg.weights));
                    return out;
                  });
}

template <typename T>
typename BasicGraph<T>::Var sac_forward(BasicGraph<T>& g,
                                        typename BasicGraph<T>::Var features,
                                        const SacConfig& cfg, SacWeights& w,
                                        SacTrace* trace) {
  using Var = typename BasicGraph<T>::Var;
  cfg.validate();
  const Shape f = g.value(features).shape();
  if (f.c != cfg.width) {
    throw ShapeError("sac_forward: expected " + std::to_string(cfg.width) +
                     " channels, got " + f.str());
  }
  if (static_cast<int>(w.rounds.size()) != cfg.rounds) {
    throw ShapeError("sac_forward: weights carry " +
                     std::to_string(w.rounds.size()) + " rounds, config has " +
                     std::to_string(cfg.rounds));
  }
  const auto dirs = cfg.active_directions();
  Var current = g.conv2d(features, w.entry);
  Var fused{};
  for (int r = 0; r < cfg.rounds; ++r) {
    SacRoundWeights& round = w.rounds[r];
    Var weights;
    if (cfg.uniform_attention) {
      weights = g.input(BasicTensor<T>({f.n, cfg.n, f.h, f.w},
                                       T(1) / static_cast<T>(cfg.n)));
    } else {
      weights = attention_weights(g, features, round.attention);
    }
    if (trace != nullptr) {
      trace->attention.push_back(g.value(weights).template cast<float>());
    }
    std::vector<Var> scans;
    scans.reserve(static_cast<size_t>(cfg.n) * dirs.size());
    for (int k = 1; k <= cfg.n; ++k) {
      const double alpha = attenuation_factor(cfg.n, k);
      for (size_t d = 0; d < dirs.size(); ++d) {
        Param& beta = round.betas[(k - 1) * dirs.size() + d];
        scans.push_back(g.scan(current, beta, alpha, dirs[d]));
      }
    }
    fused = fuse_round<T>(g, scans, weights);
    if (r + 1 < cfg.rounds) current = g.conv2d(fused, *round.reduce);
  }
  return g.relu(g.group_norm(g.conv2d(fused, w.exit), w.exit_norm));
}

#define SACNET_INSTANTIATE_GRAPH_MODULES(T)                                   \
  template BasicGraph<T>::Var attention_weights(                              \
      BasicGraph<T>&, BasicGraph<T>::Var, AttentionWeights&);                 \
  template BasicGraph<T>::Var fuse_round(                                     \
      BasicGraph<T>&, std::span<const BasicGraph<T>::Var>, BasicGraph<T>::Var); \
  template BasicGraph<T>::Var sac_forward(BasicGraph<T>&, BasicGraph<T>::Var, \
                                          const SacConfig&, SacWeights&,      \
                                          SacTrace*);
SACNET_INSTANTIATE_GRAPH_MODULES(float)
SACNET_INSTANTIATE_GRAPH_MODULES(double)
#undef SACNET_INSTANTIATE_GRAPH_MODULES

namespace {

ModuleResult run_module(const Tensor& input,
                        const std::function<Graph::Var(Graph&, Graph::Var)>& body) {
  auto graph = std::make_shared<Graph>();
  Graph::Var in = graph->input(input);
  Graph::Var out = body(*graph, in);
  ModuleResult result{graph->value(out), nullptr, graph->region_signature()};
  result.vjp = [graph, in, out](const Tensor& cot) {
    graph->backward(out, cot);
    const Tensor& g = graph->grad(in);
    return g.empty() ? Tensor(graph->value(in).shape()) : g;
  };
  return result;
}

}  // namespace

ModuleResult attention_weights(const Tensor& features, AttentionWeights& w) {
  return run_module(features, [&w](Graph& g, Graph::Var in) {
    return attention_weights<float>(g, in, w);
  });
}

ModuleResult sac_forward(const Tensor& features, const SacConfig& cfg,
                         SacWeights& w) {
  return run_module(features, [&cfg, &w](Graph& g, Graph::Var in) {
    return sac_forward<float>(g, in, cfg, w);
  });
}

}  // namespace sacnet
