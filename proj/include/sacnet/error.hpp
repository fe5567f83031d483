#ifndef SACNET_ERROR_HPP_
#define SACNET_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sacnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or channel counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values, unknown keys, config hash mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed files: images, masks, weight containers.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in gradients or losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sacnet

#endif  // SACNET_ERROR_HPP_
