#ifndef SACNET_GRADIENT_SUITE_HPP_
#define SACNET_GRADIENT_SUITE_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sacnet/grad_check.hpp"
#include "sacnet/graph.hpp"
#include "sacnet/net.hpp"
#include "sacnet/sac.hpp"

namespace sacnet {

using NamedParams = std::vector<std::pair<std::string, Param*>>;

// Every trainable parameter reachable through w.visit.
template <typename Weights>
NamedParams trainable_params(Weights& w, const std::string& prefix) {
  NamedParams out;
  w.visit(
      [&out](const std::string& name, Param& p) {
        if (p.trainable) out.emplace_back(name, &p);
      },
      prefix);
  return out;
}
NamedParams trainable_params(NetWeights& w);

// Settings for checking 32-bit cotangents against 64-bit central
// differences: relative error 1e-3, floored at 1e-3 of the largest
// cotangent entry, entries whose stencil crosses a ReLU or scan kink
// skipped.
GradCheckOptions mixed_precision_options(uint64_t seed);

// Checks the 32-bit VJP of a graph body against central differences of the
// same body evaluated on a double graph. body is called as
// body(BasicGraph<T>&, BasicGraph<T>::Var input) for T = float and double
// and returns the output Var. Checked inputs: x, then every entry of
// params (the double graph reads the perturbed values through bind()).
template <typename Body>
GradCheckReport check_against_fp64(const Tensor& x, const NamedParams& params,
                                   Body body, GradCheckOptions options) {
  std::vector<TensorD> inputs = {x.cast<double>()};
  options.input_names = {"input"};
  for (const auto& [name, p] : params) {
    inputs.push_back(p->value.template cast<double>());
    options.input_names.push_back(name);
  }
  std::vector<Tensor> saved;
  for (const auto& np : params) saved.push_back(np.second->value);

  uint64_t region = 0;
  ForwardFn<double> forward = [&](const std::vector<TensorD>& in) {
    GraphD g;
    for (size_t i = 0; i < params.size(); ++i) {
      g.bind(*params[i].second, in[i + 1]);
    }
    GraphD::Var out = body(g, g.input(in[0]));
    region = g.region_signature();
    return g.value(out);
  };
  options.region = [&region] { return region; };
  VjpFn<double> vjp = [&](const std::vector<TensorD>& in, const TensorD& cot) {
    for (size_t i = 0; i < params.size(); ++i) {
      params[i].second->value = in[i + 1].cast<float>();
      params[i].second->zero_grad();
    }
    Graph g;
    Graph::Var input = g.input(in[0].cast<float>());
    Graph::Var out = body(g, input);
    g.backward(out, cot.cast<float>());
    std::vector<TensorD> grads;
    grads.push_back(g.grad(input).empty() ? TensorD(in[0].shape())
                                          : g.grad(input).cast<double>());
    for (const auto& np : params) grads.push_back(np.second->grad.cast<double>());
    return grads;
  };
  GradCheckReport report = grad_check<double>(forward, vjp, inputs, options);
  for (size_t i = 0; i < params.size(); ++i) {
    params[i].second->value = saved[i];
    params[i].second->zero_grad();
  }
  return report;
}

// Seeded checks on small random problems.
// Scan on a (2, 3, 5, 6) map, 64-bit throughout, tolerance 1e-5.
GradCheckReport check_scan(uint64_t seed);
// Attention network on (1, 6, 5, 7) features, n = 3.
GradCheckReport check_attention(uint64_t seed);
// Full SAC module on (1, 6, 5, 7) features, n = 3, two rounds.
GradCheckReport check_sac(uint64_t seed);
// Two-stage network with SAC on a 16 x 16 image, through the training loss.
GradCheckReport check_micro_net(uint64_t seed);

}  // namespace sacnet

#endif  // SACNET_GRADIENT_SUITE_HPP_
