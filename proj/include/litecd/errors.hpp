#pragma once

#include <stdexcept>
#include <string>

namespace litecd {

/// Raised when a caller breaks an operation's precondition (shapes, ranges,
/// malformed input). Maps to CLI exit code 2.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Loss or parameters became NaN/Inf. Maps to CLI exit code 3.
class NumericDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint does not belong to the network being built. Maps to CLI exit code 4.
class ModelMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void contract_fail(const std::string& what) { throw ContractViolation(what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) contract_fail(what);
}

}  // namespace litecd
