#include "echomi/error.hpp"

namespace echomi {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::Duplicate: return "duplicate entry";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Degenerate: return "degenerate input";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::Runtime: return "runtime failure";
  }
  return "unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Parse:
    case ErrorCode::NotFound:
    case ErrorCode::Duplicate:
      return true;
    default:
      return false;
  }
}

}  // namespace echomi
