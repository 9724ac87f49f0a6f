#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace octopath {

enum class ErrorCode {
  InvalidGeometry,
  OutOfBounds,
  FormatError,
  IoError,
  ConfigError,
  ShapeError,
  InvalidSpec,
  InvalidClass,
  HeadMismatch,
  EmptyDataset,
  InsufficientLog,
  InsufficientRuns,
  LabelOutOfWindow,
  WheelSpeedExceeded,
  DegenerateICR,
  InvalidScenario,
  InvalidGoal,
  NoPath,
  MissingArtifact,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace octopath
