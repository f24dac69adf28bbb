#pragma once

#include <stdexcept>
#include <string>

namespace echomi {

enum class ErrorCode {
  InvalidArgument,  // precondition or hyperparameter-domain violation
  Parse,            // malformed input file
  NotFound,         // missing file or directory
  Duplicate,        // repeated manifest entry
  Io,               // unreadable or unwritable file
  Degenerate,       // geometry or data that cannot support the computation
  InsufficientData, // too few samples, classes, ridge rows, ...
  Runtime,          // anything else that failed while running
};

const char* to_string(ErrorCode code);

/// Validation errors are caller mistakes (bad input, bad flags); the rest are
/// failures that happened while computing.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

}  // namespace echomi
