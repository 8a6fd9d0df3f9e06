#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smc {

enum class ErrorKind {
  kInvalidParameter,
  kInvalidWeights,
  kParticleCollapse,
  kNumeric,
  kDegenerateBackwardKernel,
  kConfiguration,
  kBoundViolation,
  kContractViolation,
  kInfeasible,
  kImpossibleObservation,
  kIo,
  kValidation,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit status without parsing messages.
class SmcError : public std::runtime_error {
 public:
  SmcError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace smc
