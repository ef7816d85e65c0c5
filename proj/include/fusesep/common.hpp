// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace fusesep {

// Error taxonomy for the whole library.  The CLI maps InvalidConfig (and
// command-line parse failures) to exit code 2, InvalidInput/DataError to 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& m) : std::runtime_error(m) {}
};

// A value violates an operation's precondition (shape mismatch, zero-norm
// reference, non-finite sample, ...).
struct InvalidInput : Error {
  explicit InvalidInput(const std::string& m) : Error(m) {}
};

// A configuration object is self-inconsistent (hop does not divide n_fft,
// f_max above Nyquist, unknown window name, ...).
struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& m) : Error(m) {}
};

// External data cannot be read or fails validation (WAV header damage,
// sample-rate mismatch, checkpoint hash mismatch, ...).
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(m) {}
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace fusesep
