#pragma once

#include <stdexcept>
#include <string>

namespace unc {

// Operand shapes do not conform; the message names both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (bad distribution, label out of range, ...).
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// File parsing / persistence failures; the message includes the path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation requested on a model kind that cannot support it.
class UnsupportedModelError : public std::runtime_error {
 public:
  explicit UnsupportedModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration errors (missing keys, unknown sections, bad syntax).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace unc
