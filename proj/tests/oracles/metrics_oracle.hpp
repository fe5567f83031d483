#ifndef SACNET_TESTS_ORACLES_METRICS_ORACLE_HPP_
#define SACNET_TESTS_ORACLES_METRICS_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sacnet/metrics.hpp"
#include "sacnet/random.hpp"
#include "sacnet/tensor.hpp"

namespace sacnet::oracle {

inline Tensor map_from(int h, int w, const std::function<double(int, int)>& f) {
  Tensor t({1, 1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) t.at(0, 0, y, x) = static_cast<float>(f(y, x));
  }
  return t;
}

// Naive loops straight from the definitions.
struct Brute {
  std::vector<double> precision, recall;
  double max_f = 0, adaptive_f = 0, mae = 0, ber = 0;
};

inline Brute brute_force(const Tensor& pred, const Tensor& gt) {
  Brute b;
  const int64_t n = pred.numel();
  int64_t pos = 0;
  for (int64_t i = 0; i < n; ++i) pos += gt[i] == 1.0f ? 1 : 0;
  for (int k = 0; k < 256; ++k) {
    int64_t tp = 0, predicted = 0;
    for (int64_t i = 0; i < n; ++i) {
      if (static_cast<double>(pred[i]) > k / 255.0) {
        ++predicted;
        if (gt[i] == 1.0f) ++tp;
      }
    }
    const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double r = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
    b.precision.push_back(p);
    b.recall.push_back(r);
    b.max_f = std::max(b.max_f, f_beta(p, r));
  }
  double mean = 0;
  for (int64_t i = 0; i < n; ++i) mean += pred[i];
  const double thr = std::min(2 * mean / static_cast<double>(n), 1.0);
  int64_t tp = 0, predicted = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (pred[i] >= thr && pred[i] > 0) {
      ++predicted;
      if (gt[i] == 1.0f) ++tp;
    }
  }
  b.adaptive_f = f_beta(predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0,
                        pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0);
  for (int64_t i = 0; i < n; ++i) {
    b.mae += std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
  }
  b.mae /= static_cast<double>(n);
  int64_t fg_hit = 0, fg = 0, bg_hit = 0, bg = 0;
  for (int64_t i = 0; i < n; ++i) {
    const bool p = pred[i] >= 0.5f;
    if (gt[i] == 1.0f) {
      ++fg;
      fg_hit += p ? 1 : 0;
    } else {
      ++bg;
      bg_hit += p ? 0 : 1;
    }
  }
  const double tpr = fg ? static_cast<double>(fg_hit) / static_cast<double>(fg) : 1.0;
  const double tnr = bg ? static_cast<double>(bg_hit) / static_cast<double>(bg) : 1.0;
  b.ber = 100.0 * (1.0 - 0.5 * (tpr + tnr));
  return b;
}

inline std::pair<Tensor, Tensor> random_pair(uint64_t seed) {
  Rng rng(seed);
  Tensor pred({1, 1, 8, 8}), gt({1, 1, 8, 8});
  for (int64_t i = 0; i < 64; ++i) {
    // Half the values sit exactly on a threshold.
    pred[i] = coin(rng) ? static_cast<float>(uniform_index(rng, 256)) / 255.0f
                        : static_cast<float>(uniform01(rng));
    gt[i] = coin(rng, 0.35) ? 1.0f : 0.0f;
  }
  if (seed % 10 == 0) gt = Tensor({1, 1, 8, 8});
  if (seed % 10 == 5) gt = Tensor({1, 1, 8, 8}, 1.0f);
  return {pred, gt};
}

struct Golden {
  const char* name;
  double fmax, fadaptive, s, mae, ber;
};

// Values printed by tests/oracles/metrics_reference.py.
inline const Golden kGolden[] = {
    {"quadrants_inverted", 0, 0, 0, 1, 100},
    {"disc_ramp", 0.372408594044, 0.132315521628, 0.306828044666, 0.508056640625, 51.8342151675},
    {"rect_noisy", 1, 0.7, 0.94696064808, 0.106398809524, 0},
    {"edge_column", 0.25, 0.25, 0.371439154908, 0.4375, 50},
};

inline std::pair<Tensor, Tensor> golden_fixture(const std::string& name) {
  if (name == "quadrants_inverted") {
    Tensor g = map_from(16, 16, [](int y, int x) { return (y < 8) == (x < 8) ? 1 : 0; });
    return {map_from(16, 16, [&](int y, int x) { return 1 - g.at(0, 0, y, x); }), g};
  }
  if (name == "disc_ramp") {
    return {map_from(16, 16, [](int y, int x) { return ((3 * y + 5 * x) % 17) / 16.0; }),
            map_from(16, 16, [](int y, int x) {
              return (y - 6) * (y - 6) + (x - 9) * (x - 9) <= 25 ? 1 : 0;
            })};
  }
  if (name == "rect_noisy") {
    auto in = [](int y, int x) { return y >= 2 && y <= 9 && x >= 3 && x <= 12 ? 1 : 0; };
    return {map_from(12, 14, [&](int y, int x) { return (in(y, x) * 12 + (x * y) % 5) / 16.0; }),
            map_from(12, 14, in)};
  }
  return {map_from(8, 8, [](int y, int x) { return ((x + 2 * y) % 8) / 8.0; }),
          map_from(8, 8, [](int, int x) { return x == 7 ? 1 : 0; })};
}

}  // namespace sacnet::oracle

#endif  // SACNET_TESTS_ORACLES_METRICS_ORACLE_HPP_
