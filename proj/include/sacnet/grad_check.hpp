#ifndef SACNET_GRAD_CHECK_HPP_
#define SACNET_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sacnet/tensor.hpp"

namespace sacnet {

template <typename T>
using ForwardFn =
    std::function<BasicTensor<T>(const std::vector<BasicTensor<T>>& inputs)>;

// Returns one cotangent per input, in input order.
template <typename T>
using VjpFn = std::function<std::vector<BasicTensor<T>>(
    const std::vector<BasicTensor<T>>& inputs, const BasicTensor<T>& cot)>;

struct GradCheckOptions {
  // Finite-difference step, applied as an absolute perturbation.
  double step = 1e-4;
  // 2 = central difference, 4 = fourth-order five-point stencil.
  int stencil = 2;
  double tolerance = 1e-5;
  // Denominator floor as a fraction of the largest analytic cotangent entry
  // magnitude. Entries far below the gradient scale are judged against the
  // scale rather than their own (noise-dominated) magnitude.
  double floor_fraction = 1e-6;
  // Check at most this many entries per input (0 = all), sampled without
  // replacement from the seeded RNG.
  int64_t max_entries_per_input = 0;
  uint64_t seed = 0;
  // Cotangent of all ones instead of a seeded standard normal draw.
  bool ones_cotangent = false;
  // Optional per-entry filter; entries rejected here are not checked.
  std::function<bool(size_t input, int64_t index, double value)> include;
  // Skip entries whose difference quotients at step and step/2 disagree by
  // more than kink_tolerance (relative): the objective is not smooth there.
  bool detect_kinks = false;
  double kink_tolerance = 1e-2;
  // Fail if more than this fraction of candidate entries was skipped as
  // non-smooth.
  double max_kink_fraction = 0.05;
  // Optional probe naming the piecewise-smooth region the latest forward
  // evaluation landed in (for example a hash of ReLU masks). Entries whose
  // stencil points leave the unperturbed region are retried with steps
  // shrunk by 10x up to region_retries times, then skipped as kinks.
  std::function<uint64_t()> region;
  int region_retries = 0;
  // Optional names for reporting, one per input.
  std::vector<std::string> input_names;
};

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0;
  int64_t worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
  int64_t checked = 0;
  int64_t filtered = 0;
  int64_t kinks = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0;
  // Index into groups of the worst offender.
  size_t worst_group = 0;
  int64_t checked = 0;
  int64_t kinks = 0;
  double tolerance = 0;
  bool passed = false;

  std::string summary() const;
};

// Compares the analytic VJP of `forward` against finite differences of the
// scalar objective sum(cot * forward(inputs)), accumulated in double.
template <typename T>
GradCheckReport grad_check(const ForwardFn<T>& forward, const VjpFn<T>& vjp,
                           const std::vector<BasicTensor<T>>& inputs,
                           const GradCheckOptions& options);

}  // namespace sacnet

#endif  // SACNET_GRAD_CHECK_HPP_
