#pragma once

#include <stdexcept>
#include <string>

namespace qaware {

// Invalid model, scenario or client configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Kalman update whose innovation variance is numerically zero.
struct DegenerateUpdateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Belief that is not a valid Gaussian (non-symmetric or not PSD covariance).
struct BeliefError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidQueryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN input to a network, or an iterative solver that did not converge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qaware
