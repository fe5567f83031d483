#include "sacnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "sacnet/ops.hpp"

namespace sacnet {

ConvLayer ConvLayer::make(int64_t in_c, int64_t out_c, int k, int stride,
                          Rng& rng) {
  ConvLayer layer;
  Tensor kernel({out_c, in_c, k, k});
  const double std_dev = std::sqrt(2.0 / static_cast<double>(in_c * k * k));
  for (int64_t i = 0; i < kernel.numel(); ++i) {
    kernel[i] = static_cast<float>(std_dev * normal(rng));
  }
  layer.kernel = Param(std::move(kernel), true);
  layer.bias = Param(Tensor({1, out_c, 1, 1}), false);
  layer.stride = stride;
  layer.pad = (k - 1) / 2;
  return layer;
}

NormLayer NormLayer::make(int64_t channels, int groups) {
  NormLayer layer;
  layer.gamma = Param(Tensor({1, channels, 1, 1}, 1.0f), false);
  layer.beta = Param(Tensor({1, channels, 1, 1}), false);
  layer.groups = groups > 0 ? groups : ops::default_groups(channels);
  return layer;
}

namespace {

template <typename T>
typename BasicGraph<T>::Backward unary(
    std::function<BasicTensor<T>(const BasicTensor<T>&)> vjp) {
  return [vjp = std::move(vjp)](const BasicTensor<T>& cot) {
    return std::vector<BasicTensor<T>>{vjp(cot)};
  };
}

}  // namespace

template <typename T>
void BasicGraph<T>::bind(const Param& p, Value value) {
  require_same_shape(value.shape(), p.value.shape(), "Graph::bind");
  bound_.emplace_back(&p, std::move(value));
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::input(Value value) {
  nodes_.push_back({std::move(value), {}, nullptr, nullptr});
  grads_.emplace_back();
  return {nodes_.size() - 1};
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::param(Param& p) {
  Value v;
  auto it = std::find_if(bound_.begin(), bound_.end(),
                         [&p](const auto& b) { return b.first == &p; });
  if (it != bound_.end()) {
    v = it->second;
  } else if constexpr (std::is_same_v<T, float>) {
    v = p.value;
  } else {
    v = p.value.template cast<T>();
  }
  nodes_.push_back({std::move(v), {}, nullptr, &p});
  grads_.emplace_back();
  return {nodes_.size() - 1};
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::record(std::vector<Var> inputs, Value value,
                         Backward backward) {
  nodes_.push_back({std::move(value), std::move(inputs), std::move(backward),
                    nullptr});
  grads_.emplace_back();
  return {nodes_.size() - 1};
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::conv2d(Var x, ConvLayer& layer) {
  Var k = param(layer.kernel);
  Var b = param(layer.bias);
  auto r = ops::conv2d(value(x), value(k), value(b), layer.stride, layer.pad);
  return record({x, k, b}, std::move(r.out),
                [vjp = std::move(r.vjp)](const Value& cot) {
                  auto g = vjp(cot);
                  return std::vector<Value>{std::move(g.input),
                                             std::move(g.kernel),
                                             std::move(g.bias)};
                });
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::group_norm(Var x, NormLayer& layer) {
  Var gamma = param(layer.gamma);
  Var beta = param(layer.beta);
  auto r = ops::group_norm(value(x), value(gamma), value(beta), layer.groups,
                           layer.eps);
  return record({x, gamma, beta}, std::move(r.out),
                [vjp = std::move(r.vjp)](const Value& cot) {
                  auto g = vjp(cot);
                  return std::vector<Value>{std::move(g.input),
                                             std::move(g.gamma),
                                             std::move(g.beta)};
                });
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::relu(Var x) {
  auto r = ops::relu(value(x));
  Var out = record({x}, std::move(r.out), unary<T>(std::move(r.vjp)));
  nodes_.back().piecewise = true;
  return out;
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::sigmoid(Var x) {
  auto r = ops::sigmoid(value(x));
  return record({x}, std::move(r.out), unary<T>(std::move(r.vjp)));
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::softmax_over_factors(Var logits) {
  auto r = ops::softmax_over_factors(value(logits));
  return record({logits}, std::move(r.out), unary<T>(std::move(r.vjp)));
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::resize(Var x, int64_t out_h, int64_t out_w) {
  auto r = ops::bilinear_resize(value(x), out_h, out_w);
  return record({x}, std::move(r.out), unary<T>(std::move(r.vjp)));
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::add(Var a, Var b) {
  Value out = sacnet::add(value(a), value(b));
  return record({a, b}, std::move(out), [](const Value& cot) {
    return std::vector<Value>{cot, cot};
  });
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::concat(std::span<const Var> parts) {
  std::vector<Value> values;
  std::vector<int64_t> widths;
  values.reserve(parts.size());
  for (Var v : parts) {
    values.push_back(value(v));
    widths.push_back(value(v).c());
  }
  Value out = concat_channels<T>(values);
  return record(std::vector<Var>(parts.begin(), parts.end()), std::move(out),
                [widths](const Value& cot) {
                  std::vector<Value> g;
                  g.reserve(widths.size());
                  int64_t begin = 0;
                  for (int64_t w : widths) {
                    g.push_back(slice_channels(cot, begin, w));
                    begin += w;
                  }
                  return g;
                });
}

template <typename T>
typename BasicGraph<T>::Var BasicGraph<T>::scan(Var x, Param& beta, double alpha,
                                                 Direction direction) {
  Var b = param(beta);
  auto r = attenuated_scan(value(x), direction, static_cast<T>(alpha), value(b));
  Var out = record({x, b}, std::move(r.out),
                   [vjp = std::move(r.vjp)](const Value& cot) {
                     auto g = vjp(cot);
                     return std::vector<Value>{std::move(g.input),
                                                std::move(g.beta)};
                   });
  nodes_.back().piecewise = true;
  return out;
}

template <typename T>
uint64_t BasicGraph<T>::region_signature() const {
  uint64_t hash = 1469598103934665603ull;
  for (const Node& node : nodes_) {
    if (!node.piecewise) continue;
    for (T v : node.value.data()) {
      hash = (hash ^ (v > 0 ? 1u : 0u)) * 1099511628211ull;
    }
  }
  return hash;
}

template <typename T>
void BasicGraph<T>::backward(Var root, Value seed) {
  require_same_shape(seed.shape(), value(root).shape(), "backward seed");
  for (auto& g : grads_) g = Value();
  grads_[root.id] = std::move(seed);
  for (size_t i = root.id + 1; i-- > 0;) {
    if (grads_[i].empty()) continue;
    Node& node = nodes_[i];
    if (node.param != nullptr) {
      if (node.param->trainable) {
        if constexpr (std::is_same_v<T, float>) {
          node.param->grad += grads_[i];
        } else {
          node.param->grad += grads_[i].template cast<float>();
        }
      }
      continue;
    }
    if (!node.backward) continue;
    std::vector<Value> cots = node.backward(grads_[i]);
    for (size_t j = 0; j < node.inputs.size() && j < cots.size(); ++j) {
      if (cots[j].empty()) continue;
      Value& slot = grads_[node.inputs[j].id];
      if (slot.empty()) {
        slot = std::move(cots[j]);
      } else {
        slot += cots[j];
      }
    }
  }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace sacnet
