#include "physworld/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "physworld/error.hpp"

namespace physworld::depth {
namespace {

struct Line {
  double alpha = 1.0;
  double beta = 0.0;
};

// Weighted least-squares line through (x, y) in centred form.
bool solve_weighted(std::span<const double> x, std::span<const double> y,
                    std::span<const double> w, Line& out) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  if (!(sw > 0.0)) return false;
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (y[i] - my);
  }
  if (!(sxx > 0.0)) return false;
  out.alpha = sxy / sxx;
  out.beta = my - out.alpha * mx;
  return true;
}

double median_in_place(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

// 1.4826 * median absolute deviation, the normal-consistent robust scale.
double robust_scale(std::span<const double> r) {
  std::vector<double> tmp(r.begin(), r.end());
  const double med = median_in_place(tmp);
  for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = std::abs(r[i] - med);
  return 1.4826 * median_in_place(tmp);
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * a * a : delta * a - 0.5 * delta * delta;
}

double robust_rms(std::span<const double> r, double delta) {
  double sum = 0.0;
  for (double v : r) sum += huber(v, delta);
  return std::sqrt(2.0 * sum / double(r.size()));
}

}  // namespace

CalibrationResult fit_scale_shift(std::span<const double> raw, std::span<const double> reference,
                                  const CalibrationOptions& options) {
  if (raw.size() != reference.size()) {
    throw Error(ErrorCode::kInvalidArgument, "raw/reference sample counts differ");
  }
  const std::size_t n = raw.size();
  if (n == 0 || n < options.min_overlap) {
    throw Error(ErrorCode::kEmptyOverlap,
                std::to_string(n) + " jointly valid pixels, need " +
                    std::to_string(options.min_overlap));
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  if (*lo == *hi) throw Error(ErrorCode::kDegenerateDepth, "raw depth is constant over overlap");

  std::vector<double> w(n, 1.0);
  std::vector<double> r(n);
  Line line;
  if (!solve_weighted(raw, reference, w, line)) {
    throw Error(ErrorCode::kDegenerateDepth, "singular normal equations");
  }
  auto update_residuals = [&] {
    for (std::size_t i = 0; i < n; ++i) r[i] = line.alpha * raw[i] + line.beta - reference[i];
  };
  update_residuals();

  double mean_ref = 0.0;
  for (double v : reference) mean_ref += std::abs(v);
  mean_ref /= double(n);
  const double delta_floor = 1e-12 * (1.0 + mean_ref);

  // The threshold is never allowed to grow, so the Huber objective at the
  // current threshold is non-increasing from one pass to the next.
  double delta = std::max(options.huber_k * robust_scale(r), delta_floor);

  CalibrationResult result;
  result.residual_history.push_back(robust_rms(r, delta));
  for (int it = 0; it < options.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(r[i]);
      w[i] = a <= delta ? 1.0 : delta / a;
    }
    Line next;
    if (!solve_weighted(raw, reference, w, next)) break;
    const double change = std::hypot(next.alpha - line.alpha, next.beta - line.beta);
    const double norm = std::hypot(next.alpha, next.beta);
    line = next;
    update_residuals();
    delta = std::min(delta, std::max(options.huber_k * robust_scale(r), delta_floor));
    result.residual_history.push_back(robust_rms(r, delta));
    result.iterations = it + 1;
    if (change <= options.tolerance * std::max(norm, std::numeric_limits<double>::min())) break;
  }

  if (!(line.alpha > 0.0)) {
    throw Error(ErrorCode::kNegativeScale, "fitted scale " + std::to_string(line.alpha));
  }
  result.alpha = line.alpha;
  result.beta = line.beta;
  result.final_residual = result.residual_history.back();
  result.inlier_count = static_cast<std::size_t>(
      std::count_if(r.begin(), r.end(), [&](double v) { return std::abs(v) <= delta; }));
  return result;
}

CalibrationResult fit_scale_shift(const DepthMap& raw, const DepthMap& reference,
                                  const CalibrationOptions& options) {
  if (raw.width() != reference.width() || raw.height() != reference.height()) {
    throw Error(ErrorCode::kInvalidArgument, "depth maps differ in size");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.mask()[i] && reference.mask()[i]) {
      x.push_back(raw.values()[i]);
      y.push_back(reference.values()[i]);
    }
  }
  return fit_scale_shift(x, y, options);
}

DepthMap apply_calibration(const DepthMap& map, const CalibrationResult& calib) {
  if (!(calib.alpha > 0.0)) {
    throw Error(ErrorCode::kNegativeScale, "calibration scale must be positive");
  }
  DepthMap out(map.width(), map.height());
  for (std::uint32_t v = 0; v < map.height(); ++v) {
    for (std::uint32_t u = 0; u < map.width(); ++u) {
      if (!map.valid(u, v)) continue;
      out.set(u, v, calib.alpha * map.value(u, v) + calib.beta);
    }
  }
  return out;
}

std::vector<DepthMap> apply_calibration(std::span<const DepthMap> sequence,
                                        const CalibrationResult& calib) {
  std::vector<DepthMap> out;
  out.reserve(sequence.size());
  for (const auto& m : sequence) out.push_back(apply_calibration(m, calib));
  return out;
}

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k) {
  k.validate();
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  cloud.pixels.reserve(depth.valid_count());
  for (std::uint32_t v = 0; v < depth.height(); ++v) {
    for (std::uint32_t u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v)) continue;
      const double d = depth.value(u, v);
      cloud.points.emplace_back(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      cloud.pixels.emplace_back(u, v);
    }
  }
  return cloud;
}

}  // namespace physworld::depth
