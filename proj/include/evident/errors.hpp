#pragma once

#include <stdexcept>
#include <string>

namespace evident {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration, arguments, or file contents.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite or divergent numerics. The message carries diagnostics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evident
