#include "smc/error.hpp"

namespace smc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidParameter: return "invalid-parameter";
    case ErrorKind::kInvalidWeights: return "invalid-weights";
    case ErrorKind::kParticleCollapse: return "particle-collapse";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kDegenerateBackwardKernel: return "degenerate-backward-kernel";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kBoundViolation: return "bound-violation";
    case ErrorKind::kContractViolation: return "contract-violation";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kImpossibleObservation: return "impossible-observation";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kValidation: return "validation";
  }
  return "unknown";
}

void raise(ErrorKind kind, const std::string& what) {
  throw SmcError(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace smc
