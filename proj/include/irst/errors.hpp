#pragma once

#include <stdexcept>
#include <string>

namespace irst {

// Error taxonomy used across the library. The CLI maps ConfigError to
// exit code 2 and everything else to 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IngestError : std::runtime_error {
  explicit IngestError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace irst
