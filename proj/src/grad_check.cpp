#include "sacnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sacnet/random.hpp"

namespace sacnet {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  for (const auto& g : groups) {
    os << "  " << g.name << ": max_rel_err=" << g.max_rel_error
       << " checked=" << g.checked << " kinks=" << g.kinks;
    if (g.worst_index >= 0) {
      os << " worst[" << g.worst_index << "] analytic=" << g.worst_analytic
         << " numeric=" << g.worst_numeric;
    }
    os << "\n";
  }
  os << (passed ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_error
     << " tol=" << tolerance;
  return os.str();
}

namespace {

// Stencil outputs are differenced entry by entry before the cotangent
// weighting, so entries the perturbation does not reach cancel exactly
// instead of adding round-off from the full objective.
template <typename T>
double difference_quotient(const ForwardFn<T>& forward,
                           std::vector<BasicTensor<T>>& inputs,
                           const BasicTensor<T>& cot, size_t which,
                           int64_t index, double step, int stencil,
                           const GradCheckOptions& options, uint64_t base_region,
                           bool* left_region) {
  T& slot = inputs[which][index];
  const T saved = slot;
  auto eval_at = [&](double offset) {
    slot = static_cast<T>(static_cast<double>(saved) + offset);
    // The perturbation actually realised in T.
    const double realised = static_cast<double>(slot) - saved;
    BasicTensor<T> out = forward(inputs);
    require_same_shape(out.shape(), cot.shape(), "grad_check objective");
    if (options.region && options.region() != base_region) *left_region = true;
    return std::pair{std::move(out), realised};
  };
  double total = 0;
  if (stencil == 4) {
    const BasicTensor<T> p2 = eval_at(2 * step).first;
    auto [p1, d_p1] = eval_at(step);
    auto [m1, d_m1] = eval_at(-step);
    const BasicTensor<T> m2 = eval_at(-2 * step).first;
    const double h = (d_p1 - d_m1) / 2;
    for (int64_t i = 0; i < cot.numel(); ++i) {
      const double d = (static_cast<double>(m2[i]) - static_cast<double>(p2[i])) +
                       8 * (static_cast<double>(p1[i]) - static_cast<double>(m1[i]));
      total += static_cast<double>(cot[i]) * d;
    }
    total /= 12 * h;
  } else {
    auto [p1, d_p1] = eval_at(step);
    auto [m1, d_m1] = eval_at(-step);
    for (int64_t i = 0; i < cot.numel(); ++i) {
      total += static_cast<double>(cot[i]) *
               (static_cast<double>(p1[i]) - static_cast<double>(m1[i]));
    }
    total /= d_p1 - d_m1;
  }
  slot = saved;
  return total;
}

}  // namespace

template <typename T>
GradCheckReport grad_check(const ForwardFn<T>& forward, const VjpFn<T>& vjp,
                           const std::vector<BasicTensor<T>>& inputs,
                           const GradCheckOptions& options) {
  std::vector<BasicTensor<T>> work = inputs;
  const BasicTensor<T> out0 = forward(work);
  const uint64_t base_region = options.region ? options.region() : 0;
  BasicTensor<T> cot(out0.shape(), T(1));
  Rng rng(options.seed);
  if (!options.ones_cotangent) {
    for (int64_t i = 0; i < cot.numel(); ++i) {
      cot[i] = static_cast<T>(normal(rng));
    }
  }
  const std::vector<BasicTensor<T>> analytic = vjp(work, cot);
  if (analytic.size() != inputs.size()) {
    throw ShapeError("grad_check: vjp returned " +
                     std::to_string(analytic.size()) + " cotangents for " +
                     std::to_string(inputs.size()) + " inputs");
  }

  // Entries far below the largest cotangent are judged against a floor
  // proportional to it; near-zero entries carry rounding residue only.
  double scale = 0;
  for (const auto& a : analytic) {
    for (int64_t i = 0; i < a.numel(); ++i) {
      scale = std::max(scale, std::abs(static_cast<double>(a[i])));
    }
  }
  const double floor = std::max(options.floor_fraction * scale, 1e-300);

  GradCheckReport report;
  report.tolerance = options.tolerance;
  int64_t candidates = 0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    require_same_shape(analytic[k].shape(), inputs[k].shape(),
                       "grad_check cotangent");
    GradCheckGroup group;
    group.name = k < options.input_names.size() ? options.input_names[k]
                                                : "input" + std::to_string(k);
    std::vector<int64_t> order(static_cast<size_t>(inputs[k].numel()));
    std::iota(order.begin(), order.end(), 0);
    if (options.max_entries_per_input > 0 &&
        static_cast<int64_t>(order.size()) > options.max_entries_per_input) {
      shuffle(order, rng);
      order.resize(static_cast<size_t>(options.max_entries_per_input));
      std::sort(order.begin(), order.end());
    }

    for (int64_t idx : order) {
      const double value = static_cast<double>(inputs[k][idx]);
      if (options.include && !options.include(k, idx, value)) {
        ++group.filtered;
        continue;
      }
      ++candidates;
      const double a = static_cast<double>(analytic[k][idx]);
      bool left_region = false;
      double step = options.step;
      double numeric =
          difference_quotient(forward, work, cot, k, idx, step,
                              options.stencil, options, base_region, &left_region);
      for (int retry = 0; left_region && retry < options.region_retries; ++retry) {
        step /= 10;
        left_region = false;
        numeric = difference_quotient(forward, work, cot, k, idx, step, options.stencil,
                                      options, base_region, &left_region);
      }
      if (left_region) {
        ++group.kinks;
        continue;
      }
      if (options.detect_kinks) {
        const double half = difference_quotient(
            forward, work, cot, k, idx, step / 2, options.stencil,
            options, base_region, &left_region);
        const double spread = std::abs(numeric - half) /
                              std::max({std::abs(numeric), std::abs(half), floor});
        if (spread > options.kink_tolerance) {
          ++group.kinks;
          continue;
        }
      }
      const double err = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), floor});
      ++group.checked;
      if (err >= group.max_rel_error) {
        group.max_rel_error = err;
        group.worst_index = idx;
        group.worst_analytic = a;
        group.worst_numeric = numeric;
      }
    }
    report.checked += group.checked;
    report.kinks += group.kinks;
    if (group.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = group.max_rel_error;
      report.worst_group = report.groups.size();
    }
    report.groups.push_back(std::move(group));
  }
  const double kink_fraction =
      candidates > 0 ? static_cast<double>(report.kinks) / candidates : 0.0;
  report.passed = report.max_rel_error <= options.tolerance &&
                  kink_fraction <= options.max_kink_fraction &&
                  report.checked > 0;
  return report;
}

template GradCheckReport grad_check(const ForwardFn<float>&,
                                    const VjpFn<float>&,
                                    const std::vector<BasicTensor<float>>&,
                                    const GradCheckOptions&);
template GradCheckReport grad_check(const ForwardFn<double>&,
                                    const VjpFn<double>&,
                                    const std::vector<BasicTensor<double>>&,
                                    const GradCheckOptions&);

}  // namespace sacnet
