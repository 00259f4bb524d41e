#pragma once

#include <stdexcept>
#include <string>

namespace hillclimb {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied malformed input (dimension mismatch, empty grid, bad parameter).
class InputError : public Error {
public:
  using Error::Error;
};

/// The gradient is too small for the normalized gradient to be meaningful.
class NearCriticalError : public Error {
public:
  using Error::Error;
};

/// No sample point lies inside the kernel window around the query.
class IsolatedQueryError : public Error {
public:
  using Error::Error;
};

/// The ball/annulus maximizer could not find an improving point although the
/// gradient says one exists.
class SolverError : public Error {
public:
  using Error::Error;
};

/// Non-finite values or undefined steps encountered while iterating.
class IntegrationError : public Error {
public:
  using Error::Error;
};

/// Experiment configuration could not be parsed or validated. `where` is a
/// field path (e.g. "algorithms[1].params.epsilon") or "line L, column C".
class ConfigError : public Error {
public:
  ConfigError(std::string where, const std::string& what)
      : Error(where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

}  // namespace hillclimb
