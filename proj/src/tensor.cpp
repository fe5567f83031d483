#include "sacnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sacnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() +
                     " vs " + b.str());
  }
}

namespace {

void require_valid(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw ShapeError("negative tensor extent " + s.str());
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape) {
  require_valid(shape);
  data_.assign(static_cast<size_t>(shape.numel()), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  require_valid(shape);
  if (static_cast<int64_t>(data_.size()) != shape.numel()) {
    throw ShapeError("buffer of length " + std::to_string(data_.size()) +
                     " does not fill shape " + shape.str());
  }
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator+=(const BasicTensor& other) {
  require_same_shape(shape_, other.shape_, "accumulate");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  BasicTensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() == b.shape()) {
    BasicTensor<T> out(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
  }
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.c != 1 || sb.n != sa.n || sb.h != sa.h || sb.w != sa.w) {
    throw ShapeError("mul: shape mismatch " + sa.str() + " vs " + sb.str());
  }
  BasicTensor<T> out(sa);
  const int64_t hw = sa.plane();
  for (int64_t n = 0; n < sa.n; ++n) {
    const T* weight = b.plane(n, 0);
    for (int64_t c = 0; c < sa.c; ++c) {
      const T* src = a.plane(n, c);
      T* dst = out.plane(n, c);
      for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] * weight[i];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape& first = parts.front().shape();
  int64_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: spatial mismatch " + first.str() +
                       " vs " + s.str());
    }
    channels += s.c;
  }
  BasicTensor<T> out({first.n, channels, first.h, first.w});
  const int64_t hw = first.plane();
  for (int64_t n = 0; n < first.n; ++n) {
    int64_t c_out = 0;
    for (const auto& p : parts) {
      const int64_t count = p.c() * hw;
      if (count > 0) {
        std::copy_n(p.plane(n, 0), count, out.plane(n, c_out));
      }
      c_out += p.c();
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int64_t begin,
                              int64_t count) {
  if (begin < 0 || count < 0 || begin + count > x.c()) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     x.shape().str());
  }
  BasicTensor<T> out({x.n(), count, x.h(), x.w()});
  const int64_t len = count * x.h() * x.w();
  for (int64_t n = 0; n < x.n(); ++n) {
    if (len > 0) std::copy_n(x.plane(n, begin), len, out.plane(n, 0));
  }
  return out;
}

template <typename T>
BasicTensor<T> flip_lr(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const int64_t rows = x.n() * x.c() * x.h();
  const int64_t w = x.w();
  for (int64_t r = 0; r < rows; ++r) {
    const T* src = x.raw() + r * w;
    T* dst = out.raw() + r * w;
    for (int64_t j = 0; j < w; ++j) dst[j] = src[w - 1 - j];
  }
  return out;
}

template <typename T>
BasicTensor<T> flip_ud(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const int64_t h = x.h();
  const int64_t w = x.w();
  for (int64_t n = 0; n < x.n(); ++n) {
    for (int64_t c = 0; c < x.c(); ++c) {
      for (int64_t i = 0; i < h; ++i) {
        std::copy_n(x.plane(n, c) + (h - 1 - i) * w, w,
                    out.plane(n, c) + i * w);
      }
    }
  }
  return out;
}

#define SACNET_INSTANTIATE(T)                                                \
  template class BasicTensor<T>;                                             \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                   \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);  \
  template BasicTensor<T> slice_channels(const BasicTensor<T>&, int64_t,     \
                                         int64_t);                           \
  template BasicTensor<T> flip_lr(const BasicTensor<T>&);                    \
  template BasicTensor<T> flip_ud(const BasicTensor<T>&);

SACNET_INSTANTIATE(float)
SACNET_INSTANTIATE(double)

#undef SACNET_INSTANTIATE

}  // namespace sacnet
