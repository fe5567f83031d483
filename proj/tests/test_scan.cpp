#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles/naive_scan.hpp"
#include "sacnet/grad_check.hpp"
#include "sacnet/gradient_suite.hpp"
#include "sacnet/scan.hpp"
#include "test_util.hpp"

using namespace sacnet;
using oracle::naive_scan;
using testing::random_tensor;


TEST_CASE("attenuation_factor") {
  CHECK(attenuation_factor(3, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(attenuation_factor(3, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(attenuation_factor(3, 3) == 0.0);
  CHECK(attenuation_factor(1, 1) == 0.0);
  CHECK_THROWS_AS(attenuation_factor(3, 0), ConfigError);
  CHECK_THROWS_AS(attenuation_factor(3, 4), ConfigError);
}

TEST_CASE("scan: hand-evaluated column") {
  // alpha = 0.5, beta = 0.1 on [1, -2, 3] scanned from row 0:
  //   r = 1 -> 1; r = 0.5 - 2 = -1.5 -> -0.15; r = -0.075 + 3 = 2.925.
  TensorD x({1, 1, 3, 1}, std::vector<double>{1, -2, 3});
  TensorD beta({1, 1, 1, 1}, 0.1);
  auto r = attenuated_scan(x, Direction::kUp, 0.5, beta);
  CHECK(r.out[0] == doctest::Approx(1.0));
  CHECK(r.out[1] == doctest::Approx(-0.15));
  CHECK(r.out[2] == doctest::Approx(2.925));

  // Scanned from the last row: r = 3 -> 3; 1.5 - 2 = -0.5 -> -0.05;
  // -0.025 + 1 = 0.975.
  auto down = attenuated_scan(x, Direction::kDown, 0.5, beta);
  CHECK(down.out[2] == doctest::Approx(3.0));
  CHECK(down.out[1] == doctest::Approx(-0.05));
  CHECK(down.out[0] == doctest::Approx(0.975));
}

TEST_CASE("scan: alpha = 1 is a pointwise leaky relu") {
  Rng rng(2);
  TensorD x = random_tensor<double>({2, 3, 4, 5}, rng);
  TensorD beta = random_tensor<double>({1, 3, 1, 1}, rng, 0.0, 1.0);
  for (Direction d : kAllDirections) {
    auto r = attenuated_scan(x, d, 1.0, beta);
    for (int64_t n = 0; n < 2; ++n) {
      for (int64_t c = 0; c < 3; ++c) {
        for (int64_t i = 0; i < 20; ++i) {
          const double v = x.plane(n, c)[i];
          CHECK(r.out.plane(n, c)[i] == (v >= 0 ? v : beta[c] * v));
        }
      }
    }
  }
}

TEST_CASE("scan: alpha = 0 and beta = 1 give prefix sums") {
  TensorD x({1, 1, 1, 4}, std::vector<double>{1, -2, 3, 0.5});
  TensorD beta({1, 1, 1, 1}, 1.0);
  auto left = attenuated_scan(x, Direction::kLeft, 0.0, beta).out;
  CHECK(left == TensorD({1, 1, 1, 4}, std::vector<double>{1, -1, 2, 2.5}));
  auto right = attenuated_scan(x, Direction::kRight, 0.0, beta).out;
  CHECK(right == TensorD({1, 1, 1, 4}, std::vector<double>{2.5, 1.5, 3.5, 0.5}));
}

TEST_CASE("scan: impulse decays as (1 - alpha)^distance") {
  const double alpha = 1.0 / 3.0;
  TensorD x({1, 1, 1, 8});
  x[0] = 1.0;
  auto r = attenuated_scan(x, Direction::kLeft, alpha, TensorD({1, 1, 1, 1}, 0.1));
  for (int i = 0; i < 8; ++i) {
    CHECK(r.out[i] == doctest::Approx(std::pow(1.0 - alpha, i)).epsilon(1e-12));
  }
}

TEST_CASE("property: scan equals the per-pixel recurrence bit-exactly") {
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const Shape s{1 + static_cast<int64_t>(uniform_index(rng, 2)),
                  1 + static_cast<int64_t>(uniform_index(rng, 4)),
                  1 + static_cast<int64_t>(uniform_index(rng, 9)),
                  1 + static_cast<int64_t>(uniform_index(rng, 9))};
    Tensor x = random_tensor<float>(s, rng, -2, 2);
    Tensor beta = random_tensor<float>({1, s.c, 1, 1}, rng, 0, 1);
    const float alpha = static_cast<float>(attenuation_factor(3, 1 + seed % 3));
    for (Direction d : kAllDirections) {
      CHECK(attenuated_scan(x, d, alpha, beta).out ==
            naive_scan(x, d, alpha, beta));
    }
  }
}

TEST_CASE("property: opposite directions are mirror images") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(50 + seed);
    Tensor x = random_tensor<float>({1, 2, 6, 7}, rng, -2, 2);
    Tensor beta = random_tensor<float>({1, 2, 1, 1}, rng, 0, 1);
    const float alpha = 0.25f;
    CHECK(attenuated_scan(x, Direction::kDown, alpha, beta).out ==
          flip_ud(attenuated_scan(flip_ud(x), Direction::kUp, alpha, beta).out));
    CHECK(attenuated_scan(x, Direction::kRight, alpha, beta).out ==
          flip_lr(attenuated_scan(flip_lr(x), Direction::kLeft, alpha, beta).out));
  }
}

TEST_CASE("scan: beta must have one entry per channel") {
  CHECK_THROWS_AS(attenuated_scan(Tensor({1, 3, 2, 2}), Direction::kUp, 0.5f,
                                  Tensor({1, 2, 1, 1})),
                  ShapeError);
}

TEST_CASE("scan: VJP matches finite differences (fp64, 20 seeds)") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto report = check_scan(500 + seed);
    CHECK_MESSAGE(report.passed, report.summary());
  }
}
