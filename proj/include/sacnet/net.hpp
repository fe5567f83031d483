#ifndef SACNET_NET_HPP_
#define SACNET_NET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sacnet/graph.hpp"
#include "sacnet/sac.hpp"

namespace sacnet {

struct NetConfig {
  int input_h = 64;
  int input_w = 64;
  // One entry per backbone stage; each stage halves the resolution.
  std::vector<int> backbone_channels = {16, 32, 64, 64};
  // Pyramid and SAC width W.
  int width = 64;
  // false gives the plain feature-pyramid baseline: heads read pyramid
  // features only.
  bool use_sac = true;
  // Pyramid levels (0 = deepest) that get a SAC module; empty means all.
  std::vector<int> sac_levels;
  SacConfig sac;

  int stages() const { return static_cast<int>(backbone_channels.size()); }
  // The pyramid skips the first stage.
  int levels() const { return stages() - 1; }
  bool level_has_sac(int level) const;
  // SacConfig with width forced to this network's width.
  SacConfig sac_config() const;
  void validate() const;
  // Canonical text of every field that shapes the weights or the forward
  // pass.
  std::string canonical() const;
  uint64_t hash() const;
};

struct NetWeights {
  struct Stage {
    ConvLayer conv;
    NormLayer norm;
  };
  std::vector<Stage> backbone;
  // Pyramid tensors are indexed by level, 0 = deepest.
  std::vector<ConvLayer> lateral;
  std::vector<ConvLayer> smooth;
  std::vector<std::optional<SacWeights>> sac;
  std::vector<ConvLayer> heads;

  // Deterministic random initialization: He-normal kernels except the
  // heads (std kHeadStd), zero biases, unit GN scale, scan slopes at
  // beta_init.
  static NetWeights make(const NetConfig& cfg, uint64_t seed);
  void visit(const ParamVisitor& fn);
  void zero_grad();
};

struct Prediction {
  // Merged logits per level, deep to shallow.
  std::vector<Tensor> level_logits;
  // sigmoid of the finest merged logits, resized to the input size.
  Tensor saliency;
  // attention[level][round] = (N, n, H, W) weight maps; empty without SAC.
  std::vector<std::vector<Tensor>> attention;
};

template <typename T>
struct BasicNetGraph {
  std::vector<typename BasicGraph<T>::Var> level_logits;  // deep to shallow
  typename BasicGraph<T>::Var saliency;
  std::vector<SacTrace> traces;
};
using NetGraph = BasicNetGraph<float>;

// Records the forward pass on g: backbone -> top-down pyramid -> per-level
// SAC -> per-level head on concat(SAC, pyramid) -> merged logits, where
// level l adds the upsampled merged logits of the next deeper level.
// Instantiated for float and double.
template <typename T>
BasicNetGraph<T> forward(BasicGraph<T>& g, typename BasicGraph<T>::Var image,
                         const NetConfig& cfg, NetWeights& w);

// Training loss: sum over levels and pixels of binary cross-entropy
// between gt and each level's sigmoid probabilities resized to gt
// resolution, probabilities clamped to [eps, 1 - eps]. Returns a (1,1,1,1)
// node.
inline constexpr float kProbabilityClamp = 1e-7f;
template <typename T>
typename BasicGraph<T>::Var total_loss(
    BasicGraph<T>& g,
    const std::vector<typename BasicGraph<T>::Var>& level_logits,
    const Tensor& gt, float eps = kProbabilityClamp);

// Inference without gradient bookkeeping beyond the forward record.
Prediction predict(const Tensor& image, const NetConfig& cfg, NetWeights& w);

// Forward + loss + backward; adds parameter gradients into w and returns
// the loss.
double loss_and_backward(const Tensor& image, const Tensor& gt,
                         const NetConfig& cfg, NetWeights& w);

// Binary container: "SACW", u32 version, u64 config hash, then records of
// (u32 name length, name, 4 x u32 shape, f32 data), then CRC32 of all
// preceding bytes. All integers little-endian.
inline constexpr uint32_t kWeightsVersion = 1;
void save_weights(NetWeights& w, const NetConfig& cfg,
                  const std::filesystem::path& path);
NetWeights load_weights(const NetConfig& cfg,
                        const std::filesystem::path& path);

}  // namespace sacnet

#endif  // SACNET_NET_HPP_
