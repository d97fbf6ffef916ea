#pragma once

#include <stdexcept>
#include <string>

namespace dmlboot {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad configuration, parameters, shapes, or roles.
/// CLI maps this family to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure during estimation (non-convergence, singularity, ...).
/// CLI maps this family to exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

// --- configuration / usage errors -----------------------------------------

struct InvalidKError : ConfigError {
  using ConfigError::ConfigError;
};

struct DivisibilityError : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidParamError : ConfigError {
  using ConfigError::ConfigError;
};

struct InvalidSpecError : ConfigError {
  using ConfigError::ConfigError;
};

struct DimensionMismatchError : ConfigError {
  using ConfigError::ConfigError;
};

struct EmptyTrainSetError : ConfigError {
  using ConfigError::ConfigError;
};

struct UnknownRoleError : ConfigError {
  using ConfigError::ConfigError;
};

struct InsufficientDrawsError : ConfigError {
  using ConfigError::ConfigError;
};

struct FileIoError : ConfigError {
  using ConfigError::ConfigError;
};

// --- numerical errors ------------------------------------------------------

struct DegenerateFoldError : NumericalError {
  using NumericalError::NumericalError;
};

struct SingularJacobianError : NumericalError {
  using NumericalError::NumericalError;
};

struct RankDeficiencyError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace dmlboot
