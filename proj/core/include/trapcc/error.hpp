#pragma once

#include <stdexcept>
#include <string>

namespace trapcc {

enum class ErrorCode {
  EmptyCloud,
  NoObservations,
  EmptyPool,
  BothHalvesEmpty,
  NoForwardCache,
  ShapeMismatch,
  EmptyDataset,
  CheckpointLoad,
  InvalidArgument,
  Format,
  Io,
  Config,
};

const char* to_string(ErrorCode code);

/// Exception type thrown by every public operation in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace trapcc
