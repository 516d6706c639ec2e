#pragma once

// Exception taxonomy mirrored by the CLI exit codes: configuration and
// data-validation problems are reported before any sampling starts;
// sampling failures (including initialization) happen after.

#include <stdexcept>
#include <string>

namespace causalsens {

/// Dataset or model/data mismatch (e.g. missing outcomes passed to a
/// complete-data model). CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (nonpositive iteration counts, malformed
/// sensitivity specifications, ...). CLI exit code 2.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Sampling could not produce draws. CLI exit code 3.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No valid starting point found within the redraw budget.
class InitializationError : public SamplingError {
 public:
  using SamplingError::SamplingError;
};

}  // namespace causalsens
