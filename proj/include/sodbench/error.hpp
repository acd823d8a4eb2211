#pragma once

#include <stdexcept>
#include <string>

namespace sodbench {

enum class ErrorCode {
  MissingFile,
  UnsupportedFormat,
  CorruptData,
  UnwritablePath,
  DimensionMismatch,
  InvalidArgument,
  EmptyDataset,
  EmptyGroundTruth,   // mask has no positive pixel, recall undefined
  MalformedProgram,
  OutOfBoundsPlacement,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

}  // namespace sodbench
