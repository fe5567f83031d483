#include "sacnet/gradient_suite.hpp"

#include "sacnet/random.hpp"
#include "sacnet/scan.hpp"

namespace sacnet {

namespace {

template <typename T>
BasicTensor<T> uniform_tensor(Shape s, Rng& rng, double lo, double hi) {
  BasicTensor<T> t(s);
  for (int64_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>(uniform(rng, lo, hi));
  }
  return t;
}

SacConfig small_sac() {
  SacConfig cfg;
  cfg.width = 6;
  cfg.n = 3;
  return cfg;
}

}  // namespace

NamedParams trainable_params(NetWeights& w) {
  NamedParams out;
  w.visit([&out](const std::string& name, Param& p) {
    if (p.trainable) out.emplace_back(name, &p);
  });
  return out;
}

GradCheckOptions mixed_precision_options(uint64_t seed) {
  GradCheckOptions o;
  o.step = 1e-5;
  o.tolerance = 1e-3;
  // Biases feeding group norm have exact-zero gradients whose 32-bit
  // residue is only meaningful against the overall scale.
  o.floor_fraction = 1e-3;
  // Stacked ReLUs make region changes common at step 1e-5; the 64-bit
  // objective stays accurate down to 1e-7.
  o.region_retries = 2;
  o.seed = seed;
  return o;
}

GradCheckReport check_scan(uint64_t seed) {
  Rng rng(seed);
  const Direction d = kAllDirections[seed % 4];
  const double alpha = attenuation_factor(3, 1 + static_cast<int>(seed % 3));
  std::vector<TensorD> inputs = {uniform_tensor<double>({2, 3, 5, 6}, rng, -2, 2),
                                 uniform_tensor<double>({1, 3, 1, 1}, rng, 0, 1)};
  ForwardFn<double> forward = [&](const std::vector<TensorD>& in) {
    return attenuated_scan(in[0], d, alpha, in[1]).out;
  };
  VjpFn<double> vjp = [&](const std::vector<TensorD>& in, const TensorD& cot) {
    auto g = attenuated_scan(in[0], d, alpha, in[1]).vjp(cot);
    return std::vector<TensorD>{g.input, g.beta};
  };
  GradCheckOptions o;
  o.step = 1e-6;
  o.tolerance = 1e-5;
  o.seed = seed;
  o.input_names = {"input", "beta"};
  // The scan is piecewise linear in its input; skip entries whose stencil
  // flips the sign of a pre-activation.
  o.detect_kinks = true;
  return grad_check<double>(forward, vjp, inputs, o);
}

GradCheckReport check_attention(uint64_t seed) {
  Rng rng(seed);
  AttentionWeights w = AttentionWeights::make(6, 4, 3, 2, rng);
  const Tensor x = uniform_tensor<float>({1, 6, 5, 7}, rng, -1, 1);
  return check_against_fp64(
      x, trainable_params(w, "attention"),
      [&w](auto& g, auto in) {
        using T = typename std::remove_reference_t<decltype(g)>::Value::value_type;
        return attention_weights<T>(g, in, w);
      },
      mixed_precision_options(seed));
}

GradCheckReport check_sac(uint64_t seed) {
  Rng rng(seed);
  const SacConfig cfg = small_sac();
  SacWeights w = SacWeights::make(cfg, rng);
  const Tensor x = uniform_tensor<float>({1, 6, 5, 7}, rng, -1, 1);
  return check_against_fp64(
      x, trainable_params(w, "sac"),
      [&](auto& g, auto in) {
        using T = typename std::remove_reference_t<decltype(g)>::Value::value_type;
        return sac_forward<T>(g, in, cfg, w);
      },
      mixed_precision_options(seed));
}

GradCheckReport check_micro_net(uint64_t seed) {
  NetConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.backbone_channels = {4, 6};
  cfg.width = 6;
  cfg.sac = small_sac();
  NetWeights w = NetWeights::make(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const Tensor image = uniform_tensor<float>({1, 3, 16, 16}, rng, 0, 1);
  Tensor gt({1, 1, 16, 16});
  for (int64_t i = 0; i < gt.numel(); ++i) gt[i] = coin(rng, 0.3) ? 1.0f : 0.0f;
  return check_against_fp64(
      image, trainable_params(w),
      [&](auto& g, auto in) {
        using T = typename std::remove_reference_t<decltype(g)>::Value::value_type;
        auto net = forward<T>(g, in, cfg, w);
        return total_loss<T>(g, net.level_logits, gt);
      },
      mixed_precision_options(seed));
}

}  // namespace sacnet
