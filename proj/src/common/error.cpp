#include "brainage/error.hpp"

namespace brainage {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kUnsupportedUpsample: return "unsupported upsample";
    case ErrorCode::kInsufficientChannels: return "insufficient channels";
    case ErrorCode::kEmptyEpochs: return "empty epochs";
    case ErrorCode::kMapping: return "mapping error";
    case ErrorCode::kSchema: return "schema error";
    case ErrorCode::kUndefinedLog: return "undefined log";
    case ErrorCode::kLength: return "length error";
    case ErrorCode::kEmptyDataset: return "empty dataset";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kType: return "type error";
    case ErrorCode::kTooLarge: return "problem too large";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kRender: return "render error";
    case ErrorCode::kInvalidData: return "invalid data";
  }
  return "error";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace brainage
