#pragma once

#include <stdexcept>
#include <string>

namespace exdbn {

// Malformed input data (CSV, graph files, dimension mismatches).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration values or unparseable config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic data generation failed (e.g. explosive process).
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace exdbn
