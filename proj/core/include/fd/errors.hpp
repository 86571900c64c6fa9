#pragma once

#include <stdexcept>
#include <string>

namespace fd {

/// Experiment configuration rejected before any work ran.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A client upload violated the wire contract (unnormalized row,
/// duplicate/unsorted index, shape mismatch). The message names the client.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Acceptance threshold rejected every sample (self-training) or drove the
/// acceptance probability to zero (closed form).
class DegenerateThresholdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fd
