#include "hebbcnn/error.hpp"

namespace hebb {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace hebb
