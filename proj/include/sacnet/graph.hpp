#ifndef SACNET_GRAPH_HPP_
#define SACNET_GRAPH_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "sacnet/random.hpp"
#include "sacnet/scan.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

// A trainable tensor together with its accumulated gradient.
struct Param {
  Tensor value;
  Tensor grad;
  // Frozen parameters keep their value and never accumulate gradient.
  bool trainable = true;
  // Weight decay applies to kernels and scan slopes, not to biases or
  // normalization affine terms.
  bool decay = true;

  Param() = default;
  Param(Tensor v, bool decay_enabled)
      : value(std::move(v)), grad(value.shape()), decay(decay_enabled) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

// Convolution weights with fixed geometry.
struct ConvLayer {
  Param kernel;
  Param bias;
  int stride = 1;
  int pad = 0;

  // He-normal kernel (std = sqrt(2 / fan_in)), zero bias.
  static ConvLayer make(int64_t in_c, int64_t out_c, int k, int stride,
                        Rng& rng);
};

struct NormLayer {
  Param gamma;
  Param beta;
  int groups = 1;
  double eps = 1e-5;

  // gamma = 1, beta = 0. groups <= 0 selects ops::default_groups.
  static NormLayer make(int64_t channels, int groups);
};

// Reverse-mode tape over scalar type T. Nodes are recorded in execution
// order; backward() walks them in reverse, feeding each node's output
// cotangent to its VJP and summing the returned cotangents into its inputs.
// Parameter leaves add their cotangent into Param::grad, so repeated
// backward passes accumulate. Parameters are stored in float; a double
// graph converts them on entry, or reads values supplied through bind().
template <typename T>
class BasicGraph {
 public:
  using Value = BasicTensor<T>;

  struct Var {
    size_t id = 0;
  };

  // Returns one cotangent per recorded input; an empty tensor means "none".
  using Backward = std::function<std::vector<Value>(const Value& cot)>;

  // Use value in place of p.value whenever p enters this graph.
  void bind(const Param& p, Value value);

  Var input(Value value);
  Var param(Param& p);

  // Generic node; used by the op wrappers below and by module code.
  Var record(std::vector<Var> inputs, Value value, Backward backward);

  const Value& value(Var v) const { return nodes_[v.id].value; }
  // Cotangent of v after backward(); empty if v did not influence the root.
  const Value& grad(Var v) const { return grads_[v.id]; }
  size_t size() const { return nodes_.size(); }

  Var conv2d(Var x, ConvLayer& layer);
  Var group_norm(Var x, NormLayer& layer);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var softmax_over_factors(Var logits);
  Var resize(Var x, int64_t out_h, int64_t out_w);
  Var add(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var scan(Var x, Param& beta, double alpha, Direction direction);

  void backward(Var root, Value seed);

  // Hash of the activation pattern of every ReLU and scan node (which
  // entries are positive). Two forward passes with equal signatures lie in
  // the same linear piece of those nonlinearities, given positive scan
  // slopes.
  uint64_t region_signature() const;

 private:
  struct Node {
    Value value;
    std::vector<Var> inputs;
    Backward backward;
    Param* param = nullptr;
    bool piecewise = false;
  };

  std::vector<Node> nodes_;
  std::vector<Value> grads_;
  std::vector<std::pair<const Param*, Value>> bound_;
};

using Graph = BasicGraph<float>;
using GraphD = BasicGraph<double>;

}  // namespace sacnet

#endif  // SACNET_GRAPH_HPP_
