#ifndef SACNET_PARALLEL_HPP_
#define SACNET_PARALLEL_HPP_

#include <cstdint>
#include <functional>

namespace sacnet {

// Upper bound on worker lanes used by parallel_for. Defaults to 1.
void set_num_threads(int threads);
int num_threads();

// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one
// per lane. Callers must only write to disjoint locations per index so the
// result is identical for any lane count.
void parallel_for(int64_t count, const std::function<void(int64_t)>& fn);

}  // namespace sacnet

#endif  // SACNET_PARALLEL_HPP_
