#ifndef SACNET_SAC_HPP_
#define SACNET_SAC_HPP_

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sacnet/graph.hpp"
#include "sacnet/ops.hpp"
#include "sacnet/random.hpp"
#include "sacnet/scan.hpp"

namespace sacnet {

using ParamVisitor = std::function<void(const std::string& name, Param& p)>;

struct SacConfig {
  // Number of attenuation factors; factor k uses alpha = (n - k) / n.
  int n = 3;
  // Rounds of scan + fusion. Two rounds give every pixel the whole plane.
  int rounds = 2;
  // Module width W (input and output channels).
  int width = 64;
  // Hidden width of the attention network; 0 selects max(1, W / 4).
  int attention_hidden = 0;
  // Group-norm group count; 0 selects ops::default_groups per layer.
  int gn_groups = 0;
  // Enabled scan directions, indexed by Direction.
  std::array<bool, 4> directions = {true, true, true, true};
  // Replace the learned attention with constant 1/n weights.
  bool uniform_attention = false;
  float beta_init = 0.1f;
  bool beta_learnable = true;

  // Channels of every scanned map: floor(W / n).
  int per_map() const { return width / n; }
  int hidden() const {
    return attention_hidden > 0 ? attention_hidden : std::max(1, width / 4);
  }
  std::vector<Direction> active_directions() const;
  // Channels after fusing one round: directions * n * per_map.
  int fused_channels() const;
  // Throws ConfigError when an invariant is violated.
  void validate() const;
};

// Psi: 3x3 conv -> GN -> ReLU -> 3x3 conv -> GN -> ReLU -> 1x1 conv to n
// logits; softmax across the n channels is applied by the caller.
struct AttentionWeights {
  ConvLayer conv1;
  NormLayer norm1;
  ConvLayer conv2;
  NormLayer norm2;
  ConvLayer logits;

  static AttentionWeights make(int64_t in_c, int hidden, int n, int gn_groups,
                               Rng& rng);
  void visit(const ParamVisitor& fn, const std::string& prefix);
};

struct SacRoundWeights {
  AttentionWeights attention;
  // Scan slopes indexed [k * directions + d] in fusion order.
  std::vector<Param> betas;
  // 1x1 reduction feeding the next round; absent in the last round.
  std::optional<ConvLayer> reduce;
};

struct SacWeights {
  ConvLayer entry;  // W -> per_map, 1x1
  std::vector<SacRoundWeights> rounds;
  ConvLayer exit;   // fused -> W, 1x1
  NormLayer exit_norm;

  static SacWeights make(const SacConfig& cfg, Rng& rng);
  void visit(const ParamVisitor& fn, const std::string& prefix);
};

// Attention maps observed during a forward pass, one (N, n, H, W) tensor
// per round.
struct SacTrace {
  std::vector<Tensor> attention;
};

template <typename T>
struct FuseGrads {
  std::vector<BasicTensor<T>> scans;
  BasicTensor<T> weights;
};

// Weighted concatenation. scans holds n blocks of equal-shape maps (block k
// is scans[k * per_block .. (k + 1) * per_block), in direction order);
// each block is multiplied by weight channel k, broadcast over channels,
// and all products are concatenated in order.
template <typename T>
ops::WithVjp<T, FuseGrads<T>> fuse_round(std::span<const BasicTensor<T>> scans,
                                         const BasicTensor<T>& weights);

// Graph versions, instantiated for float and double. The double versions
// serve as high-precision references for gradient checks.
template <typename T>
typename BasicGraph<T>::Var attention_weights(
    BasicGraph<T>& g, typename BasicGraph<T>::Var features,
    AttentionWeights& w);
template <typename T>
typename BasicGraph<T>::Var fuse_round(
    BasicGraph<T>& g, std::span<const typename BasicGraph<T>::Var> scans,
    typename BasicGraph<T>::Var weights);
template <typename T>
typename BasicGraph<T>::Var sac_forward(BasicGraph<T>& g,
                                        typename BasicGraph<T>::Var features,
                                        const SacConfig& cfg, SacWeights& w,
                                        SacTrace* trace = nullptr);

// Stand-alone module evaluation. vjp maps an output cotangent to the input
// cotangent and adds parameter cotangents into the weights' Param::grad.
struct ModuleResult {
  Tensor out;
  std::function<Tensor(const Tensor& cot)> vjp;
  // Graph::region_signature of the forward pass.
  uint64_t region = 0;
};

ModuleResult attention_weights(const Tensor& features, AttentionWeights& w);
ModuleResult sac_forward(const Tensor& features, const SacConfig& cfg,
                         SacWeights& w);

}  // namespace sacnet

#endif  // SACNET_SAC_HPP_
