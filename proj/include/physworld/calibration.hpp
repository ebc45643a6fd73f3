#pragma once

#include <span>
#include <vector>

#include "physworld/depth.hpp"

namespace physworld::depth {

struct CalibrationResult {
  double alpha = 1.0;
  double beta = 0.0;
  std::size_t inlier_count = 0;
  // Robust RMS: sqrt(2 * mean Huber loss) at the final threshold.
  double final_residual = 0.0;
  int iterations = 0;
  // Robust RMS after each reweighting pass, in order.
  std::vector<double> residual_history;
};

struct CalibrationOptions {
  std::size_t min_overlap = 10;
  int max_iterations = 50;
  double tolerance = 1e-8;
  double huber_k = 1.345;
};

// Robust scale/shift fit alpha * raw + beta ~ reference over pixels valid in
// both maps, by iteratively reweighted least squares with Huber weights.
CalibrationResult fit_scale_shift(const DepthMap& raw, const DepthMap& reference,
                                  const CalibrationOptions& options = {});

// Same fit on paired samples; used directly by tests and by fit_scale_shift.
CalibrationResult fit_scale_shift(std::span<const double> raw, std::span<const double> reference,
                                  const CalibrationOptions& options = {});

DepthMap apply_calibration(const DepthMap& map, const CalibrationResult& calib);
std::vector<DepthMap> apply_calibration(std::span<const DepthMap> sequence,
                                        const CalibrationResult& calib);

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k);

}  // namespace physworld::depth
