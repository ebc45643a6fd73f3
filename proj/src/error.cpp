#include "physworld/error.hpp"

#include <algorithm>
#include <cmath>

#include "physworld/math.hpp"

namespace physworld {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyOverlap: return "EmptyOverlap";
    case ErrorCode::kDegenerateDepth: return "DegenerateDepth";
    case ErrorCode::kNegativeScale: return "NegativeScale";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kNonUnitNormal: return "NonUnitNormal";
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyMesh: return "EmptyMesh";
    case ErrorCode::kNonPositiveVoxel: return "NonPositiveVoxel";
    case ErrorCode::kUnassembledScene: return "UnassembledScene";
    case ErrorCode::kExplosionDetected: return "ExplosionDetected";
    case ErrorCode::kStepOutOfRange: return "StepOutOfRange";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
  }
  return "Unknown";
}

double rotation_angle(const Mat3& r) {
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

}  // namespace physworld
