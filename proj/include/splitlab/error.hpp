#pragma once

#include <stdexcept>
#include <string>

namespace splitlab {

// Base error for everything the library can reject at runtime.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/layer shape violations. Carries the offending layer index when known.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what, int layer_index = -1)
      : Error(what), layer_index(layer_index) {}
  int layer_index;
};

// Wire-frame and file-format decode failures.
class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what, long offset = -1)
      : Error(what), offset(offset) {}
  long offset;
};

// Experiment-config validation failure; `field_path` is a dotted path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field_path)
      : Error(what + " (at " + field_path + ")"), field_path(std::move(field_path)) {}
  std::string field_path;
};

// Referenced checkpoint/corpus file does not exist.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::string& what) : Error(what) {}
};

// Optimization produced a non-finite value; carries context for the trace.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what, int stage = -1)
      : Error(what), stage(stage) {}
  int stage;
};

}  // namespace splitlab
