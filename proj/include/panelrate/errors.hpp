#pragma once

#include <stdexcept>
#include <string>

namespace panelrate {

/// Broad failure class; the CLI maps each one to a stable exit code.
enum class ErrorCategory {
  input,      // unreadable files, malformed rows, bad flags
  invariant,  // data that parses but violates the panel data model
  numerical,  // estimation cannot produce a finite answer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message),
        category_(category),
        kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define PANELRATE_DEFINE_ERROR(Name, Category)                 \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& message)                  \
        : Error(ErrorCategory::Category, #Name, message) {}    \
  };

// Dataset validation.
PANELRATE_DEFINE_ERROR(EmptyDataset, input)
PANELRATE_DEFINE_ERROR(ParseError, input)
PANELRATE_DEFINE_ERROR(InconsistentCauseCount, invariant)
PANELRATE_DEFINE_ERROR(NonMonotoneTimes, invariant)
PANELRATE_DEFINE_ERROR(NonPositiveTime, invariant)
PANELRATE_DEFINE_ERROR(DecreasingCumulativeCount, invariant)
PANELRATE_DEFINE_ERROR(InvalidCause, invariant)

// Estimation.
PANELRATE_DEFINE_ERROR(NoSubjectsAtRisk, numerical)
PANELRATE_DEFINE_ERROR(EmptyCurve, numerical)
PANELRATE_DEFINE_ERROR(NumericalUnderflow, numerical)
PANELRATE_DEFINE_ERROR(EmptyCandidates, input)
PANELRATE_DEFINE_ERROR(InvalidArgument, input)

// Simulation.
PANELRATE_DEFINE_ERROR(InsufficientReps, numerical)
PANELRATE_DEFINE_ERROR(DegenerateAtRisk, numerical)
PANELRATE_DEFINE_ERROR(IncompatibleReports, input)

#undef PANELRATE_DEFINE_ERROR

}  // namespace panelrate
