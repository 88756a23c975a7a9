#pragma once

#include <stdexcept>
#include <string>

namespace cavcool {

// Base for every error raised by the library. The CLI maps the three
// families below onto distinct exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Invalid or inconsistent configuration (bad geometry, unphysical values).
class ConfigError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class GeometryError : public ConfigError {
public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "geometry"; }
};

// Numerical failure: integrator breakdown, fit divergence, missing data.
class NumericError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class IntegrationError : public NumericError {
public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "integration"; }
};

class DivergenceError : public NumericError {
public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "divergence"; }
};

class ResourceError : public NumericError {
public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "resource"; }
};

// Signal analysis could not extract the requested quantity from a trace.
class AnalysisError : public NumericError {
public:
  using NumericError::NumericError;
  const char* kind() const noexcept override { return "analysis"; }
};

class IoError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

// Input file that does not follow the expected column layout.
class SchemaError : public IoError {
public:
  using IoError::IoError;
  const char* kind() const noexcept override { return "schema"; }
};

} // namespace cavcool
