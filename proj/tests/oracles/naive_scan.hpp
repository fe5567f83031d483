#ifndef SACNET_TESTS_ORACLES_NAIVE_SCAN_HPP_
#define SACNET_TESTS_ORACLES_NAIVE_SCAN_HPP_

#include <cstdint>

#include "sacnet/scan.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet::oracle {

// Straightforward per-pixel recurrence used as the reference. Walks every
// line in the scan order with explicit coordinates.
template <typename T>
BasicTensor<T> naive_scan(const BasicTensor<T>& x, Direction d, T alpha,
                          const BasicTensor<T>& beta) {
  BasicTensor<T> out(x.shape());
  const int64_t h = x.h(), w = x.w();
  const bool vertical = d == Direction::kUp || d == Direction::kDown;
  const int64_t lines = vertical ? w : h;
  const int64_t steps = vertical ? h : w;
  const T keep = T(1) - alpha;
  for (int64_t n = 0; n < x.n(); ++n) {
    for (int64_t c = 0; c < x.c(); ++c) {
      const T b = beta[c];
      for (int64_t line = 0; line < lines; ++line) {
        T f = 0;
        for (int64_t s = 0; s < steps; ++s) {
          int64_t i = 0, j = 0;
          switch (d) {
            case Direction::kUp: i = s; j = line; break;
            case Direction::kDown: i = h - 1 - s; j = line; break;
            case Direction::kLeft: i = line; j = s; break;
            case Direction::kRight: i = line; j = w - 1 - s; break;
          }
          const T r = keep * f + x.at(n, c, i, j);
          f = r >= 0 ? r : b * r;
          out.at(n, c, i, j) = f;
        }
      }
    }
  }
  return out;
}

}  // namespace sacnet::oracle

#endif  // SACNET_TESTS_ORACLES_NAIVE_SCAN_HPP_
