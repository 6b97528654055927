#pragma once

#include <stdexcept>
#include <string>

namespace fedq {

// Invalid user input: bad config keys, malformed environment files,
// inconsistent budgets. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A simulator invariant was broken (visit cap exceeded, negative variance
// beyond tolerance, round bound violated). The CLI maps this to exit code 3.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fedq
