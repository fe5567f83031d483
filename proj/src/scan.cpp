#include "sacnet/scan.hpp"

#include <string>
#include <vector>

#include "sacnet/parallel.hpp"

namespace sacnet {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kUp:
      return "up";
    case Direction::kDown:
      return "down";
    case Direction::kLeft:
      return "left";
    case Direction::kRight:
      return "right";
  }
  return "?";
}

double attenuation_factor(int n, int k) {
  if (n < 1 || k < 1 || k > n) {
    throw ConfigError("attenuation_factor: k=" + std::to_string(k) +
                      " outside 1.." + std::to_string(n));
  }
  return static_cast<double>(n - k) / static_cast<double>(n);
}

namespace {

// A scan visits `lines` independent lanes of `steps` elements. Element s of
// lane l lives at base + l * lane_stride + pos(s) * step_stride, where pos
// runs forward or backward.
struct ScanLayout {
  int64_t lines;
  int64_t steps;
  int64_t lane_stride;
  int64_t step_stride;
  bool reverse;

  int64_t index(int64_t lane, int64_t step) const {
    const int64_t pos = reverse ? steps - 1 - step : step;
    return lane * lane_stride + pos * step_stride;
  }
};

ScanLayout layout_for(Direction d, int64_t h, int64_t w) {
  switch (d) {
    case Direction::kUp:
      return {w, h, 1, w, false};
    case Direction::kDown:
      return {w, h, 1, w, true};
    case Direction::kLeft:
      return {h, w, w, 1, false};
    case Direction::kRight:
      return {h, w, w, 1, true};
  }
  return {0, 0, 0, 0, false};
}

}  // namespace

template <typename T>
ops::WithVjp<T, ScanGrads<T>> attenuated_scan(const BasicTensor<T>& x,
                                              Direction direction, T alpha,
                                              const BasicTensor<T>& beta) {
  const Shape s = x.shape();
  if (beta.numel() != s.c) {
    throw ShapeError("attenuated_scan: beta has " +
                     std::to_string(beta.numel()) + " entries for " +
                     std::to_string(s.c) + " channels");
  }
  const T carry = T(1) - alpha;
  const ScanLayout lay = layout_for(direction, s.h, s.w);
  BasicTensor<T> y(s);
  BasicTensor<T> pre(s);  // r, kept for the VJP

  parallel_for(s.n * s.c, [&](int64_t lane_id) {
    const int64_t c = lane_id % s.c;
    const T b = beta[c];
    const T* src = x.raw() + lane_id * s.plane();
    T* dst = y.raw() + lane_id * s.plane();
    T* r_out = pre.raw() + lane_id * s.plane();
    for (int64_t line = 0; line < lay.lines; ++line) {
      for (int64_t step = 0; step < lay.steps; ++step) {
        const int64_t i = lay.index(line, step);
        const T r = step == 0 ? src[i]
                              : carry * dst[lay.index(line, step - 1)] + src[i];
        r_out[i] = r;
        dst[i] = r >= T(0) ? r : b * r;
      }
    }
  });

  auto vjp = [pre, beta, carry, lay](const BasicTensor<T>& dy) {
    const Shape& s = pre.shape();
    require_same_shape(dy.shape(), s, "attenuated_scan vjp");
    ScanGrads<T> g{BasicTensor<T>(s), BasicTensor<T>({1, s.c, 1, 1})};
    // One lane per channel so the beta reduction has a fixed order.
    parallel_for(s.c, [&](int64_t c) {
      const T b = beta[c];
      T dbeta = 0;
      for (int64_t n = 0; n < s.n; ++n) {
        const int64_t off = (n * s.c + c) * s.plane();
        const T* r = pre.raw() + off;
        const T* d = dy.raw() + off;
        T* dx = g.input.raw() + off;
        for (int64_t line = 0; line < lay.lines; ++line) {
          T pending = 0;  // (1 - alpha) * dr of the successor
          for (int64_t step = lay.steps - 1; step >= 0; --step) {
            const int64_t i = lay.index(line, step);
            const T total = d[i] + pending;
            T dr;
            if (r[i] >= T(0)) {
              dr = total;
            } else {
              dr = b * total;
              dbeta += total * r[i];
            }
            dx[i] = dr;
            pending = carry * dr;
          }
        }
      }
      g.beta[c] = dbeta;
    });
    return g;
  };
  return {std::move(y), std::move(vjp)};
}

template ops::WithVjp<float, ScanGrads<float>> attenuated_scan(
    const BasicTensor<float>&, Direction, float, const BasicTensor<float>&);
template ops::WithVjp<double, ScanGrads<double>> attenuated_scan(
    const BasicTensor<double>&, Direction, double, const BasicTensor<double>&);

}  // namespace sacnet
