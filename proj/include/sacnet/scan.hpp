#ifndef SACNET_SCAN_HPP_
#define SACNET_SCAN_HPP_

#include <array>
#include <string_view>

#include "sacnet/ops.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet {

// Direction in which the carried state travels across the map.
//   kUp:    starts at row 0 and proceeds to increasing rows.
//   kDown:  starts at the last row and proceeds to decreasing rows.
//   kLeft:  starts at column 0 and proceeds to increasing columns.
//   kRight: starts at the last column and proceeds to decreasing columns.
enum class Direction { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

inline constexpr std::array<Direction, 4> kAllDirections = {
    Direction::kUp, Direction::kDown, Direction::kLeft, Direction::kRight};

std::string_view to_string(Direction d);

// alpha_k = (n - k) / n for k in 1..n. Small alpha carries context far,
// alpha = 1 disables propagation.
double attenuation_factor(int n, int k);

template <typename T>
struct ScanParams {
  Direction direction = Direction::kUp;
  T alpha = 0;
  // Negative slope, one entry per channel, shape (1, C, 1, 1).
  BasicTensor<T> beta;
};

template <typename T>
struct ScanGrads {
  BasicTensor<T> input;
  BasicTensor<T> beta;
};

// Recurrently-attenuating translation. Along the scan direction, with state
// f = 0 before the first scanned index:
//   r = (1 - alpha) * f_prev + x
//   f = max(r, 0) + beta_c * min(r, 0)
// alpha is a fixed hyperparameter; the VJP returns cotangents for the input
// and for beta.
template <typename T>
ops::WithVjp<T, ScanGrads<T>> attenuated_scan(const BasicTensor<T>& x,
                                              Direction direction, T alpha,
                                              const BasicTensor<T>& beta);

template <typename T>
ops::WithVjp<T, ScanGrads<T>> attenuated_scan(const BasicTensor<T>& x,
                                              const ScanParams<T>& p) {
  return attenuated_scan(x, p.direction, p.alpha, p.beta);
}

}  // namespace sacnet

#endif  // SACNET_SCAN_HPP_
