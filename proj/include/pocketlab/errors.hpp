#pragma once

#include <stdexcept>
#include <string>

namespace pocketlab {

// Every failure the library reports is one of these. They carry a message
// only; callers branch on the type.

struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct AmbiguousProjection : std::domain_error {
  using std::domain_error::domain_error;
};

struct NotOnBoundary : std::domain_error {
  using std::domain_error::domain_error;
};

struct DeltaTooLarge : std::domain_error {
  using std::domain_error::domain_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TimeoutDominated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularCouplingMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientStencil : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownExperiment : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace pocketlab
