#pragma once

#include <stdexcept>
#include <string>

namespace dfa {

// Base class for numerical failures. `name()` is the stable identifier
// printed by the CLI (exit code 2); `what()` adds context.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& message)
        : std::runtime_error(name + ": " + message), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define DFA_DEFINE_ERROR(ClassName)                                      \
    class ClassName : public Error {                                     \
    public:                                                              \
        explicit ClassName(const std::string& message)                   \
            : Error(#ClassName, message) {}                              \
    }

DFA_DEFINE_ERROR(NotPositiveDefinite);
DFA_DEFINE_ERROR(InsufficientData);
DFA_DEFINE_ERROR(FactorizationDiverged);
DFA_DEFINE_ERROR(DegenerateSpectrum);
DFA_DEFINE_ERROR(BlockNotPD);
DFA_DEFINE_ERROR(InfeasibleStart);
DFA_DEFINE_ERROR(BracketInvalid);
DFA_DEFINE_ERROR(RecoveryInconsistent);
DFA_DEFINE_ERROR(SingularFactor);
DFA_DEFINE_ERROR(ZeroVarianceChannel);
DFA_DEFINE_ERROR(UnstableAR);
DFA_DEFINE_ERROR(SingularNormalEquations);
DFA_DEFINE_ERROR(InvalidInput);

#undef DFA_DEFINE_ERROR

}  // namespace dfa
