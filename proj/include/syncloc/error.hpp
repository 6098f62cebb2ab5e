#pragma once

#include <stdexcept>
#include <string>

namespace syncloc {

enum class ErrorCode {
  MalformedInstruction,
  OutOfBounds,
  ParseError,
  InvalidProgram,
  Deadlock,
  FaultTargetMismatch,
  NotAtBarrier,
  CycleDetected,
  UnknownRegion,
  ShapeMismatch,
  IoFailure,
  UnknownRef,
  CorruptObject,
  RootNotWritten,
  MissingModelSnapshot,
  NoCurrentRegionTree,
  NoObservableTarget,
  Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace syncloc
