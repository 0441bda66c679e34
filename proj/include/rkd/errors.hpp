#pragma once

#include <stdexcept>
#include <string>

namespace rkd {

//! Base class for all numerical failures raised by the library.
class RkdError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Too few kernel-positive observations on one side of the kink.
class IdentificationError : public RkdError
{
public:
  using RkdError::RkdError;
};

class IllConditionedError : public RkdError
{
public:
  using RkdError::RkdError;
};

//! Iterative solver stopped at its iteration cap.
class ConvergenceError : public RkdError
{
public:
  ConvergenceError(const std::string& what, double last_objective)
    : RkdError(what)
    , last_objective_(last_objective)
  {
  }
  double last_objective() const noexcept { return last_objective_; }

private:
  double last_objective_;
};

class EmptyWindowError : public RkdError
{
public:
  using RkdError::RkdError;
};

class NonpositiveMeanError : public RkdError
{
public:
  using RkdError::RkdError;
};

//! Conditional density at an estimated quantile is not strictly positive.
class PivotalDensityError : public RkdError
{
public:
  PivotalDensityError(const std::string& what, double tau)
    : RkdError(what)
    , tau_(tau)
  {
  }
  double tau() const noexcept { return tau_; }

private:
  double tau_;
};

//! Invalid user-facing configuration (bad grids, malformed rule, ...).
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace rkd
