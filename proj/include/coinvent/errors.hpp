#pragma once

#include <stdexcept>
#include <string>

namespace coinvent {

/// Process exit codes used by the CLI. Each error family maps to one code.
enum class ExitCode : int {
  ok = 0,
  config = 2,
  data = 3,
  estimation = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration or out-of-domain parameters.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::config) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, ExitCode::data) {}
};

/// Negative stock, fraction outside [0,1] and similar argument violations.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what, ExitCode::config) {}
};

/// Estimation failures: rank deficiency, too few clusters, undefined statistics.
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error(what, ExitCode::estimation) {}
};

/// Lookup of an inventor or patent that is not present.
class LookupError : public Error {
 public:
  explicit LookupError(const std::string& what) : Error(what, ExitCode::data) {}
};

}  // namespace coinvent
