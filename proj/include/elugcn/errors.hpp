#pragma once

#include <stdexcept>
#include <string>

namespace elugcn {

// Exit codes of the command-line tool map one-to-one onto these categories.
enum class ErrorCategory : int {
  config = 2,
  missing_artifact = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct MissingArtifactError : Error {
  explicit MissingArtifactError(const std::string& what)
      : Error(ErrorCategory::missing_artifact, what) {}
};

// Singular systems, diverging losses, shape mismatches in numeric kernels.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct SingularMatrixError : NumericError {
  explicit SingularMatrixError(const std::string& what) : NumericError(what) {}
};

struct ShapeError : NumericError {
  explicit ShapeError(const std::string& what) : NumericError(what) {}
};

}  // namespace elugcn
