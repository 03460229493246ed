#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetsem {

enum class ErrorCode {
  Parse,        // malformed input file or flag value
  Dimension,    // inconsistent sizes, index out of range
  Convergence,  // optimizer or iteration failure
  Numeric,      // singular system, overflow, non-positive variance
  Invalid,      // value violates a domain invariant
};

inline std::string_view error_prefix(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "ERR_PARSE";
    case ErrorCode::Dimension: return "ERR_DIM";
    case ErrorCode::Convergence: return "ERR_CONV";
    case ErrorCode::Numeric: return "ERR_NUM";
    case ErrorCode::Invalid: return "ERR_ARG";
  }
  return "ERR";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace hetsem
