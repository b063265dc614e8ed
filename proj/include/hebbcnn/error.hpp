#pragma once

#include <stdexcept>
#include <string>

namespace hebb {

// Numeric values are shared with the C API status codes in hebbcnn.h.
enum class ErrorCode : int {
  kDimension = 1,
  kNumeric = 2,
  kParameter = 3,
  kFormat = 4,
  kCapability = 5,
  kIo = 6,
  kConfig = 7,
  kInternal = 8,
};

const char* error_code_name(ErrorCode code) noexcept;

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

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace hebb
