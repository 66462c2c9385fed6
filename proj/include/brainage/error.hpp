#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brainage {

enum class ErrorCode {
  kParameter,
  kUnsupportedUpsample,
  kInsufficientChannels,
  kEmptyEpochs,
  kMapping,
  kSchema,
  kUndefinedLog,
  kLength,
  kEmptyDataset,
  kIo,
  kType,
  kTooLarge,
  kConfig,
  kRender,
  kInvalidData,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code tells callers which
// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace brainage
