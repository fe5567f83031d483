#ifndef SACNET_OPS_HPP_
#define SACNET_OPS_HPP_

#include <functional>

#include "sacnet/tensor.hpp"

// Differentiable primitive layers. Every op returns its output together with
// a vector-Jacobian product closure that maps an output cotangent to the
// cotangents of the op's inputs and parameters. All ops are instantiated
// for float (training path) and double (gradient-check path).
namespace sacnet::ops {

template <typename T, typename Grads>
struct WithVjp {
  BasicTensor<T> out;
  std::function<Grads(const BasicTensor<T>& cotangent)> vjp;
};

template <typename T>
using UnaryOp = WithVjp<T, BasicTensor<T>>;

// Kernel is (out_c, in_c, kh, kw); bias is (1, out_c, 1, 1).
template <typename T>
struct ConvParams {
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
  int stride = 1;
  int pad = 0;
};

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

// Direct convolution with zero padding. With stride 1 and pad = (k - 1) / 2
// the output keeps the input's spatial size.
template <typename T>
WithVjp<T, ConvGrads<T>> conv2d(const BasicTensor<T>& x,
                                const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, int stride,
                                int pad);

template <typename T>
WithVjp<T, ConvGrads<T>> conv2d(const BasicTensor<T>& x,
                                const ConvParams<T>& p) {
  return conv2d(x, p.kernel, p.bias, p.stride, p.pad);
}

// gamma and beta are (1, C, 1, 1).
template <typename T>
struct GroupNormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  int groups = 1;
  double eps = 1e-5;
};

template <typename T>
struct GroupNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Normalizes each (sample, group) block to zero mean and unit variance
// (biased variance, statistics accumulated in double), then applies the
// per-channel affine transform.
template <typename T>
WithVjp<T, GroupNormGrads<T>> group_norm(const BasicTensor<T>& x,
                                         const BasicTensor<T>& gamma,
                                         const BasicTensor<T>& beta,
                                         int groups, double eps);

template <typename T>
WithVjp<T, GroupNormGrads<T>> group_norm(const BasicTensor<T>& x,
                                         const GroupNormParams<T>& p) {
  return group_norm(x, p.gamma, p.beta, p.groups, p.eps);
}

// min(32, C) when that divides C, otherwise the largest divisor of C not
// exceeding 32.
int default_groups(int64_t channels);

template <typename T>
UnaryOp<T> relu(const BasicTensor<T>& x);

template <typename T>
UnaryOp<T> sigmoid(const BasicTensor<T>& x);

// Per-pixel softmax across the channel axis.
template <typename T>
UnaryOp<T> softmax_over_factors(const BasicTensor<T>& logits);

// Bilinear interpolation, align_corners = false. Resizing to the input size
// returns an exact copy.
template <typename T>
UnaryOp<T> bilinear_resize(const BasicTensor<T>& x, int64_t out_h,
                           int64_t out_w);

}  // namespace sacnet::ops

#endif  // SACNET_OPS_HPP_
