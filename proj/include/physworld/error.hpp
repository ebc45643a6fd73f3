#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace physworld {

enum class ErrorCode {
  kEmptyOverlap,
  kDegenerateDepth,
  kNegativeScale,
  kTooFewPoints,
  kNoConsensus,
  kNonUnitNormal,
  kEmptyCloud,
  kEmptyInput,
  kEmptyMesh,
  kNonPositiveVoxel,
  kUnassembledScene,
  kExplosionDetected,
  kStepOutOfRange,
  kNonFiniteLoss,
  kInvalidArgument,
  kIo,
  kFormat,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is raised as this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace physworld
