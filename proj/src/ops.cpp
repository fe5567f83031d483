#include "sacnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sacnet/parallel.hpp"

namespace sacnet::ops {

namespace {

// Output columns ox whose input column ox * stride - pad + k lies in [0, in).
struct Span1d {
  int64_t lo;
  int64_t hi;  // exclusive
};

Span1d valid_outputs(int64_t in, int64_t out, int stride, int pad, int64_t k) {
  // ox * stride >= pad - k
  int64_t lo = pad - k <= 0 ? 0 : (pad - k + stride - 1) / stride;
  // ox * stride <= in - 1 + pad - k
  const int64_t top = in - 1 + pad - k;
  int64_t hi = top < 0 ? 0 : top / stride + 1;
  lo = std::min(lo, out);
  hi = std::clamp(hi, lo, out);
  return {lo, hi};
}

}  // namespace

template <typename T>
WithVjp<T, ConvGrads<T>> conv2d(const BasicTensor<T>& x,
                                const BasicTensor<T>& kernel,
                                const BasicTensor<T>& bias, int stride,
                                int pad) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (ks.c != xs.c) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(ks.c) +
                     " input channels, got " + xs.str());
  }
  if (bias.numel() != ks.n) {
    throw ShapeError("conv2d: bias " + bias.shape().str() +
                     " does not match kernel " + ks.str());
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: bad stride/pad");
  const int64_t out_h = (xs.h + 2 * pad - ks.h) / stride + 1;
  const int64_t out_w = (xs.w + 2 * pad - ks.w) / stride + 1;
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel " +
                     ks.str());
  }
  const int64_t batch = xs.n;
  const int64_t in_c = xs.c;
  const int64_t out_c = ks.n;
  const int64_t kh = ks.h;
  const int64_t kw = ks.w;
  const int64_t in_h = xs.h;
  const int64_t in_w = xs.w;

  BasicTensor<T> y({batch, out_c, out_h, out_w});
  parallel_for(batch * out_c, [&](int64_t lane) {
    const int64_t n = lane / out_c;
    const int64_t oc = lane % out_c;
    T* out_plane = y.plane(n, oc);
    std::vector<double> acc(static_cast<size_t>(out_h * out_w), bias[oc]);
    double* dst = acc.data();
    for (int64_t ic = 0; ic < in_c; ++ic) {
      const T* src = x.plane(n, ic);
      for (int64_t ky = 0; ky < kh; ++ky) {
        const Span1d rows = valid_outputs(in_h, out_h, stride, pad, ky);
        for (int64_t kx = 0; kx < kw; ++kx) {
          const Span1d cols = valid_outputs(in_w, out_w, stride, pad, kx);
          const double wv = kernel.at(oc, ic, ky, kx);
          for (int64_t oy = rows.lo; oy < rows.hi; ++oy) {
            const int64_t base = (oy * stride - pad + ky) * in_w - pad + kx;
            double* out_row = dst + oy * out_w;
            for (int64_t ox = cols.lo; ox < cols.hi; ++ox) {
              out_row[ox] += wv * src[base + ox * stride];
            }
          }
        }
      }
    }
    for (int64_t i = 0; i < out_h * out_w; ++i) out_plane[i] = static_cast<T>(acc[i]);
  });

  auto vjp = [x, kernel, stride, pad, out_h, out_w](const BasicTensor<T>& dy) {
    const Shape& xs = x.shape();
    const Shape& ks = kernel.shape();
    require_same_shape(dy.shape(), Shape{xs.n, ks.n, out_h, out_w},
                       "conv2d vjp");
    ConvGrads<T> g{BasicTensor<T>(xs), BasicTensor<T>(ks),
                   BasicTensor<T>({1, ks.n, 1, 1})};
    const int64_t batch = xs.n;
    const int64_t in_c = xs.c;
    const int64_t out_c = ks.n;
    // Input cotangent: one lane per (n, ic) plane.
    parallel_for(batch * in_c, [&](int64_t lane) {
      const int64_t n = lane / in_c;
      const int64_t ic = lane % in_c;
      std::vector<double> acc(static_cast<size_t>(xs.h * xs.w));
      double* dst = acc.data();
      for (int64_t oc = 0; oc < out_c; ++oc) {
        const T* src = dy.plane(n, oc);
        for (int64_t ky = 0; ky < ks.h; ++ky) {
          const Span1d rows = valid_outputs(xs.h, out_h, stride, pad, ky);
          for (int64_t kx = 0; kx < ks.w; ++kx) {
            const Span1d cols = valid_outputs(xs.w, out_w, stride, pad, kx);
            const double wv = kernel.at(oc, ic, ky, kx);
            for (int64_t oy = rows.lo; oy < rows.hi; ++oy) {
              const int64_t base = (oy * stride - pad + ky) * xs.w - pad + kx;
              const T* out_row = src + oy * out_w;
              for (int64_t ox = cols.lo; ox < cols.hi; ++ox) {
                dst[base + ox * stride] += wv * out_row[ox];
              }
            }
          }
        }
      }
      T* in_plane = g.input.plane(n, ic);
      for (size_t i = 0; i < acc.size(); ++i) in_plane[i] = static_cast<T>(acc[i]);
    });
    // Kernel and bias cotangents: one lane per output channel.
    parallel_for(out_c, [&](int64_t oc) {
      double bias_sum = 0;
      for (int64_t n = 0; n < batch; ++n) {
        const T* src = dy.plane(n, oc);
        for (int64_t i = 0; i < out_h * out_w; ++i) bias_sum += src[i];
      }
      g.bias[oc] = static_cast<T>(bias_sum);
      for (int64_t ic = 0; ic < in_c; ++ic) {
        for (int64_t ky = 0; ky < ks.h; ++ky) {
          const Span1d rows = valid_outputs(xs.h, out_h, stride, pad, ky);
          for (int64_t kx = 0; kx < ks.w; ++kx) {
            const Span1d cols = valid_outputs(xs.w, out_w, stride, pad, kx);
            double acc = 0;
            for (int64_t n = 0; n < batch; ++n) {
              const T* src = dy.plane(n, oc);
              const T* in = x.plane(n, ic);
              for (int64_t oy = rows.lo; oy < rows.hi; ++oy) {
                const int64_t base = (oy * stride - pad + ky) * xs.w - pad + kx;
                const T* out_row = src + oy * out_w;
                for (int64_t ox = cols.lo; ox < cols.hi; ++ox) {
                  acc += static_cast<double>(out_row[ox]) * in[base + ox * stride];
                }
              }
            }
            g.kernel.at(oc, ic, ky, kx) = static_cast<T>(acc);
          }
        }
      }
    });
    return g;
  };
  return {std::move(y), std::move(vjp)};
}

int default_groups(int64_t channels) {
  if (channels <= 0) throw ShapeError("group_norm: no channels");
  for (int64_t g = std::min<int64_t>(32, channels); g >= 1; --g) {
    if (channels % g == 0) return static_cast<int>(g);
  }
  return 1;
}

template <typename T>
WithVjp<T, GroupNormGrads<T>> group_norm(const BasicTensor<T>& x,
                                         const BasicTensor<T>& gamma,
                                         const BasicTensor<T>& beta,
                                         int groups, double eps) {
  const Shape& s = x.shape();
  if (groups < 1 || s.c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(groups) +
                     " groups do not divide " + std::to_string(s.c) +
                     " channels");
  }
  if (gamma.numel() != s.c || beta.numel() != s.c) {
    throw ShapeError("group_norm: affine parameters do not match " + s.str());
  }
  if (!(eps > 0)) throw ShapeError("group_norm: eps must be positive");
  const int64_t per_group = s.c / groups;
  const int64_t hw = s.plane();
  const int64_t count = per_group * hw;

  BasicTensor<T> normalized(s);
  std::vector<double> inv_std(static_cast<size_t>(s.n * groups));
  BasicTensor<T> y(s);
  parallel_for(s.n * groups, [&](int64_t lane) {
    const int64_t n = lane / groups;
    const int64_t g = lane % groups;
    const int64_t c0 = g * per_group;
    double sum = 0;
    for (int64_t c = c0; c < c0 + per_group; ++c) {
      const T* src = x.plane(n, c);
      for (int64_t i = 0; i < hw; ++i) sum += src[i];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0;
    for (int64_t c = c0; c < c0 + per_group; ++c) {
      const T* src = x.plane(n, c);
      for (int64_t i = 0; i < hw; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double rstd = 1.0 / std::sqrt(var + eps);
    inv_std[lane] = rstd;
    for (int64_t c = c0; c < c0 + per_group; ++c) {
      const T* src = x.plane(n, c);
      T* xhat = normalized.plane(n, c);
      T* dst = y.plane(n, c);
      for (int64_t i = 0; i < hw; ++i) {
        xhat[i] = static_cast<T>((src[i] - mean) * rstd);
        dst[i] = gamma[c] * xhat[i] + beta[c];
      }
    }
  });

  auto vjp = [normalized, inv_std = std::move(inv_std), gamma, groups,
              per_group, hw, count](const BasicTensor<T>& dy) {
    const Shape& s = normalized.shape();
    require_same_shape(dy.shape(), s, "group_norm vjp");
    GroupNormGrads<T> g{BasicTensor<T>(s), BasicTensor<T>({1, s.c, 1, 1}),
                        BasicTensor<T>({1, s.c, 1, 1})};
    parallel_for(s.n * groups, [&](int64_t lane) {
      const int64_t n = lane / groups;
      const int64_t c0 = (lane % groups) * per_group;
      double mean_dxhat = 0;
      double mean_dxhat_xhat = 0;
      for (int64_t c = c0; c < c0 + per_group; ++c) {
        const T* d = dy.plane(n, c);
        const T* xhat = normalized.plane(n, c);
        for (int64_t i = 0; i < hw; ++i) {
          const double dxhat = static_cast<double>(d[i]) * gamma[c];
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat[i];
        }
      }
      mean_dxhat /= static_cast<double>(count);
      mean_dxhat_xhat /= static_cast<double>(count);
      const double rstd = inv_std[lane];
      for (int64_t c = c0; c < c0 + per_group; ++c) {
        const T* d = dy.plane(n, c);
        const T* xhat = normalized.plane(n, c);
        T* dx = g.input.plane(n, c);
        for (int64_t i = 0; i < hw; ++i) {
          const double dxhat = static_cast<double>(d[i]) * gamma[c];
          dx[i] = static_cast<T>(
              rstd * (dxhat - mean_dxhat - xhat[i] * mean_dxhat_xhat));
        }
      }
    });
    parallel_for(s.c, [&](int64_t c) {
      double dgamma = 0;
      double dbeta = 0;
      for (int64_t n = 0; n < s.n; ++n) {
        const T* d = dy.plane(n, c);
        const T* xhat = normalized.plane(n, c);
        for (int64_t i = 0; i < hw; ++i) {
          dgamma += static_cast<double>(d[i]) * xhat[i];
          dbeta += d[i];
        }
      }
      g.gamma[c] = static_cast<T>(dgamma);
      g.beta[c] = static_cast<T>(dbeta);
    });
    return g;
  };
  return {std::move(y), std::move(vjp)};
}

template <typename T>
UnaryOp<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  auto vjp = [x](const BasicTensor<T>& dy) {
    require_same_shape(dy.shape(), x.shape(), "relu vjp");
    BasicTensor<T> dx(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    return dx;
  };
  return {std::move(y), std::move(vjp)};
}

template <typename T>
UnaryOp<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    y[i] = T(1) / (T(1) + std::exp(-x[i]));
  }
  auto vjp = [y](const BasicTensor<T>& dy) {
    require_same_shape(dy.shape(), y.shape(), "sigmoid vjp");
    BasicTensor<T> dx(y.shape());
    for (int64_t i = 0; i < y.numel(); ++i) {
      dx[i] = dy[i] * y[i] * (T(1) - y[i]);
    }
    return dx;
  };
  return {y, std::move(vjp)};
}

template <typename T>
UnaryOp<T> softmax_over_factors(const BasicTensor<T>& logits) {
  const Shape& s = logits.shape();
  if (s.c == 0) throw ShapeError("softmax_over_factors: zero factors");
  const int64_t hw = s.plane();
  BasicTensor<T> y(s);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t i = 0; i < hw; ++i) {
      T peak = logits.plane(n, 0)[i];
      for (int64_t c = 1; c < s.c; ++c) {
        peak = std::max(peak, logits.plane(n, c)[i]);
      }
      T total = 0;
      for (int64_t c = 0; c < s.c; ++c) {
        const T e = std::exp(logits.plane(n, c)[i] - peak);
        y.plane(n, c)[i] = e;
        total += e;
      }
      for (int64_t c = 0; c < s.c; ++c) y.plane(n, c)[i] /= total;
    }
  }
  auto vjp = [y](const BasicTensor<T>& dy) {
    const Shape& s = y.shape();
    require_same_shape(dy.shape(), s, "softmax vjp");
    BasicTensor<T> dx(s);
    const int64_t hw = s.plane();
    for (int64_t n = 0; n < s.n; ++n) {
      for (int64_t i = 0; i < hw; ++i) {
        T dot = 0;
        for (int64_t c = 0; c < s.c; ++c) {
          dot += y.plane(n, c)[i] * dy.plane(n, c)[i];
        }
        for (int64_t c = 0; c < s.c; ++c) {
          dx.plane(n, c)[i] = y.plane(n, c)[i] * (dy.plane(n, c)[i] - dot);
        }
      }
    }
    return dx;
  };
  return {y, std::move(vjp)};
}

namespace {

// Source taps for one output coordinate under align_corners = false.
struct Taps {
  int64_t i0;
  int64_t i1;
  double frac;
};

std::vector<Taps> bilinear_taps(int64_t in, int64_t out) {
  std::vector<Taps> taps(static_cast<size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    int64_t i0 = static_cast<int64_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const int64_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
UnaryOp<T> bilinear_resize(const BasicTensor<T>& x, int64_t out_h,
                           int64_t out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize: output extent must be positive");
  }
  const Shape in_shape = x.shape();
  if (in_shape.h == out_h && in_shape.w == out_w) {
    auto vjp = [in_shape](const BasicTensor<T>& dy) {
      require_same_shape(dy.shape(), in_shape, "bilinear_resize vjp");
      return dy;
    };
    return {x, std::move(vjp)};
  }
  if (in_shape.h < 1 || in_shape.w < 1) {
    throw ShapeError("bilinear_resize: empty input " + in_shape.str());
  }
  auto rows = bilinear_taps(in_shape.h, out_h);
  auto cols = bilinear_taps(in_shape.w, out_w);
  const Shape out_shape{in_shape.n, in_shape.c, out_h, out_w};
  BasicTensor<T> y(out_shape);
  parallel_for(in_shape.n * in_shape.c, [&](int64_t lane) {
    const T* src = x.raw() + lane * in_shape.plane();
    T* dst = y.raw() + lane * out_shape.plane();
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const Taps& r = rows[oy];
      const T* top = src + r.i0 * in_shape.w;
      const T* bottom = src + r.i1 * in_shape.w;
      const T fy = static_cast<T>(r.frac);
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const Taps& c = cols[ox];
        const T fx = static_cast<T>(c.frac);
        const T upper = top[c.i0] * (T(1) - fx) + top[c.i1] * fx;
        const T lower = bottom[c.i0] * (T(1) - fx) + bottom[c.i1] * fx;
        dst[oy * out_w + ox] = upper * (T(1) - fy) + lower * fy;
      }
    }
  });
  auto vjp = [in_shape, out_shape, rows = std::move(rows),
              cols = std::move(cols)](const BasicTensor<T>& dy) {
    require_same_shape(dy.shape(), out_shape, "bilinear_resize vjp");
    BasicTensor<T> dx(in_shape);
    parallel_for(in_shape.n * in_shape.c, [&](int64_t lane) {
      const T* src = dy.raw() + lane * out_shape.plane();
      T* dst = dx.raw() + lane * in_shape.plane();
      for (int64_t oy = 0; oy < out_shape.h; ++oy) {
        const Taps& r = rows[oy];
        T* top = dst + r.i0 * in_shape.w;
        T* bottom = dst + r.i1 * in_shape.w;
        const T fy = static_cast<T>(r.frac);
        for (int64_t ox = 0; ox < out_shape.w; ++ox) {
          const Taps& c = cols[ox];
          const T fx = static_cast<T>(c.frac);
          const T g = src[oy * out_shape.w + ox];
          const T upper = g * (T(1) - fy);
          const T lower = g * fy;
          top[c.i0] += upper * (T(1) - fx);
          top[c.i1] += upper * fx;
          bottom[c.i0] += lower * (T(1) - fx);
          bottom[c.i1] += lower * fx;
        }
      }
    });
    return dx;
  };
  return {std::move(y), std::move(vjp)};
}

#define SACNET_INSTANTIATE(T)                                                 \
  template WithVjp<T, ConvGrads<T>> conv2d(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      int, int);                                                              \
  template WithVjp<T, GroupNormGrads<T>> group_norm(                          \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      int, double);                                                           \
  template UnaryOp<T> relu(const BasicTensor<T>&);                            \
  template UnaryOp<T> sigmoid(const BasicTensor<T>&);                         \
  template UnaryOp<T> softmax_over_factors(const BasicTensor<T>&);            \
  template UnaryOp<T> bilinear_resize(const BasicTensor<T>&, int64_t, int64_t);

SACNET_INSTANTIATE(float)
SACNET_INSTANTIATE(double)

#undef SACNET_INSTANTIATE

}  // namespace sacnet::ops
