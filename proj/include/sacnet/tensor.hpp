#ifndef SACNET_TENSOR_HPP_
#define SACNET_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sacnet/error.hpp"

namespace sacnet {

// NCHW extent. Equality is componentwise.
struct Shape {
  int64_t n = 0;
  int64_t c = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

std::ostream& operator<<(std::ostream& os, const Shape& s);

// Dense row-major NCHW array. The buffer length always equals
// shape().numel().
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  int64_t n() const { return shape_.n; }
  int64_t c() const { return shape_.c; }
  int64_t h() const { return shape_.h; }
  int64_t w() const { return shape_.w; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[offset(n, c, h, w)];
  }
  const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](int64_t i) { return data_[i]; }
  const T& operator[](int64_t i) const { return data_[i]; }

  // Pointer to the (n, c) spatial plane.
  T* plane(int64_t n, int64_t c) { return raw() + offset(n, c, 0, 0); }
  const T* plane(int64_t n, int64_t c) const {
    return raw() + offset(n, c, 0, 0);
  }

  // In-place accumulate; shapes must match.
  BasicTensor& operator+=(const BasicTensor& other);

  bool all_finite() const;

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename T>
BasicTensor<T> zeros(Shape shape) {
  return BasicTensor<T>(shape);
}

// Elementwise a + b. Shapes must match.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Elementwise a * b. `b` may also be an (n, 1, h, w) weight map, broadcast
// across the channels of `a`.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s);

// Concatenate along channels. All parts share (n, h, w).
template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

// Channels [begin, begin + count).
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, int64_t begin,
                              int64_t count);

// Mirror along the width axis.
template <typename T>
BasicTensor<T> flip_lr(const BasicTensor<T>& x);

// Mirror along the height axis.
template <typename T>
BasicTensor<T> flip_ud(const BasicTensor<T>& x);

// Throws ShapeError naming both shapes unless equal.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace sacnet

#endif  // SACNET_TENSOR_HPP_
