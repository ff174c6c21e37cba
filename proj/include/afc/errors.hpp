#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace afc {

// Invalid parameter combinations, size mismatches, unreachable targets.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values detected inside the adaptive state or the loop signals.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(std::size_t block, const std::string& what)
      : std::runtime_error("block " + std::to_string(block) + ": " + what), block_(block) {}

  std::size_t block() const { return block_; }

 private:
  std::size_t block_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace afc
