#pragma once

#include <stdexcept>
#include <string>

namespace girl {

// Shape or rank mismatch between tensors/layers.
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Manifest/config schema violations. CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// File read/write/decode failures.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or runaway magnitudes during training. CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse (step after done, backward before forward, ...).
class LogicError : public std::logic_error {
public:
  explicit LogicError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace girl
