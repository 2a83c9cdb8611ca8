#pragma once

#include <stdexcept>
#include <string>

namespace rfseg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct ValueError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct NotFoundError : IoError {
  using IoError::IoError;
};

struct ConfigError : Error {
  using Error::Error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void check_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline void check_value(bool cond, const std::string& msg) {
  if (!cond) throw ValueError(msg);
}

}  // namespace rfseg
