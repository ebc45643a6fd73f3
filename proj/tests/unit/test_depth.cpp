#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "physworld/calibration.hpp"
#include "physworld/depth.hpp"
#include "physworld/error.hpp"

using namespace physworld;
using namespace physworld::depth;

namespace {

// Closed-form ordinary least squares, independent of the library solver.
std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const long double n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += (long double)x[i] * x[i];
    sxy += (long double)x[i] * y[i];
  }
  const long double a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {double(a), double((sy - a * sx) / n)};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("physworld_test_" + name);
}

}  // namespace

TEST_CASE("depth map rejects non-positive and non-finite values") {
  DepthMap m(3, 2);
  m.set(0, 0, 1.5);
  m.set(1, 0, 0.0);
  m.set(2, 0, -1.0);
  m.set(0, 1, std::nan(""));
  m.set(1, 1, INFINITY);
  CHECK(m.valid(0, 0));
  CHECK_FALSE(m.valid(1, 0));
  CHECK_FALSE(m.valid(2, 0));
  CHECK_FALSE(m.valid(0, 1));
  CHECK_FALSE(m.valid(1, 1));
  CHECK(m.valid_count() == 1);
}

TEST_CASE("PWDM round trip and malformed input") {
  DepthMap m(4, 3);
  for (std::uint32_t v = 0; v < 3; ++v)
    for (std::uint32_t u = 0; u < 4; ++u) m.set(u, v, 0.5 + 0.1 * u + v);
  m.invalidate(2, 1);
  const auto path = temp_path("roundtrip.pwdm");
  write_depth_map(path, m);
  CHECK(read_depth_map(path) == m);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 1);
  CHECK(code_of([&] { read_depth_map(path); }) == ErrorCode::kFormat);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK(code_of([&] { read_depth_map(path); }) == ErrorCode::kFormat);
  std::filesystem::remove(path);
}

TEST_CASE("identity calibration") {
  std::vector<double> x;
  for (int i = 0; i < 50; ++i) x.push_back(0.5 + 0.03 * i);
  const auto c = fit_scale_shift(x, x);
  CHECK(c.alpha == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(c.beta) < 1e-12);
  CHECK(c.alpha > 0.0);
}

TEST_CASE("outlier-robust scale and shift recovery") {
  // 32x32 synthetic grid; every fifth pixel is corrupted by +3 m.
  DepthMap raw(32, 32), ref(32, 32);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> noise(-1e-4, 1e-4);
  std::vector<double> clean_x, clean_y;
  for (std::uint32_t v = 0; v < 32; ++v) {
    for (std::uint32_t u = 0; u < 32; ++u) {
      const double d = 0.4 + 0.02 * u + 0.015 * v;
      double r = 2.0 * d + 0.5 + noise(rng);
      const bool corrupt = (v * 32 + u) % 5 == 0;
      if (!corrupt) {
        clean_x.push_back(d);
        clean_y.push_back(r);
      } else {
        r += 3.0;
      }
      raw.set(u, v, d);
      ref.set(u, v, r);
    }
  }
  const auto [a_ref, b_ref] = ols(clean_x, clean_y);
  const auto c = fit_scale_shift(raw, ref);
  CHECK(std::abs(c.alpha - a_ref) < 1e-3);
  CHECK(std::abs(c.beta - b_ref) < 1e-3);
  CHECK(std::abs(c.alpha - 2.0) < 1e-3);
  CHECK(std::abs(c.beta - 0.5) < 1e-3);
  CHECK(c.inlier_count >= clean_x.size() * 9 / 10);
  CHECK(c.inlier_count < raw.size());
}

TEST_CASE("calibration errors") {
  std::vector<double> flat(20, 1.0), y(20);
  for (int i = 0; i < 20; ++i) y[i] = i;
  CHECK(code_of([&] { fit_scale_shift(flat, y); }) == ErrorCode::kDegenerateDepth);

  std::vector<double> few{1, 2, 3}, few_y{1, 2, 3};
  CHECK(code_of([&] { fit_scale_shift(few, few_y); }) == ErrorCode::kEmptyOverlap);

  DepthMap a(4, 4), b(4, 4);
  a.set(0, 0, 1.0);
  b.set(1, 1, 1.0);
  CHECK(code_of([&] { fit_scale_shift(a, b); }) == ErrorCode::kEmptyOverlap);

  std::vector<double> down(20);
  for (int i = 0; i < 20; ++i) down[i] = 5.0 - 0.1 * i;
  CHECK(code_of([&] { fit_scale_shift(y, down); }) == ErrorCode::kNegativeScale);
}

TEST_CASE("all residuals inside the threshold reproduce least squares") {
  // Equal-magnitude residuals: MAD-scaled threshold is ~2x every residual.
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(1.0 + 0.05 * i);
    y.push_back(1.7 * x.back() - 0.2 + ((i / 2) % 2 == 0 ? 0.01 : -0.01));
  }
  const auto [a_ref, b_ref] = ols(x, y);
  const auto c = fit_scale_shift(x, y);
  CHECK(c.alpha == doctest::Approx(a_ref).epsilon(1e-12));
  CHECK(c.beta == doctest::Approx(b_ref).epsilon(1e-12));
  CHECK(c.inlier_count == x.size());
}

TEST_CASE("calibration properties over random problems") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng() % 300;
    const double alpha = 0.2 + 3.0 * u(rng), beta = -0.5 + u(rng);
    const double outlier_rate = 0.3 * u(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 0.3 + 3.0 * u(rng);
      y[i] = alpha * x[i] + beta + 0.01 * (u(rng) - 0.5);
      if (u(rng) < outlier_rate) y[i] += 1.0 + 3.0 * u(rng);
    }
    const auto c = fit_scale_shift(x, y);
    // Non-increasing robust residual across reweighting passes.
    for (std::size_t k = 1; k < c.residual_history.size(); ++k) {
      CHECK(c.residual_history[k] <= c.residual_history[k - 1] * (1.0 + 1e-12) + 1e-15);
    }
    // Invariant to the order of the pixel set.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = x[order[i]];
      ys[i] = y[order[i]];
    }
    const auto c2 = fit_scale_shift(xs, ys);
    CHECK(c2.alpha == doctest::Approx(c.alpha).epsilon(1e-9));
    CHECK(c2.beta == doctest::Approx(c.beta).epsilon(1e-9));
    CHECK(c2.inlier_count == c.inlier_count);
  }
}

TEST_CASE("apply_calibration") {
  DepthMap m(3, 1);
  m.set(0, 0, 1.0);
  m.set(1, 0, 0.1);
  CalibrationResult id;
  CHECK(apply_calibration(m, id) == m);

  CalibrationResult c;
  c.alpha = 2.0;
  c.beta = 0.5;
  CHECK(apply_calibration(m, c).value(0, 0) == doctest::Approx(2.5));

  c.alpha = 1.0;
  c.beta = -0.5;
  const auto out = apply_calibration(m, c);
  CHECK(out.valid(0, 0));
  CHECK_FALSE(out.valid(1, 0));
  CHECK_FALSE(out.valid(2, 0));

  c.alpha = -1.0;
  CHECK(code_of([&] { apply_calibration(m, c); }) == ErrorCode::kNegativeScale);
}

TEST_CASE("unproject examples") {
  CameraIntrinsics k{500.0, 400.0, 2.0, 1.0};
  DepthMap m(8, 4);
  m.set(2, 1, 1.0);
  auto cloud = unproject(m, k);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].isApprox(Vec3(0, 0, 1)));

  CameraIntrinsics unit{2.0, 2.0, 1.0, 1.0};
  DepthMap m2(4, 4);
  m2.set(3, 1, 2.0);  // (cx + fx, cy)
  cloud = unproject(m2, unit);
  REQUIRE(cloud.size() == 1);
  CHECK((cloud.points[0] - Vec3(2, 0, 2)).norm() < 1e-12);
}

TEST_CASE("unproject then project round trips every valid pixel") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  CameraIntrinsics k{525.0, 530.0, 1.7, 2.2};
  DepthMap m(4, 4);
  for (std::uint32_t v = 0; v < 4; ++v)
    for (std::uint32_t x = 0; x < 4; ++x) m.set(x, v, u(rng));
  const auto cloud = unproject(m, k);
  REQUIRE(cloud.size() == 16);
  REQUIRE(cloud.has_pixels());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const double px = k.fx * p.x() / p.z() + k.cx;
    const double py = k.fy * p.y() / p.z() + k.cy;
    const auto uu = static_cast<std::uint32_t>(std::lround(px));
    const auto vv = static_cast<std::uint32_t>(std::lround(py));
    CHECK(std::abs(px - cloud.pixels[i].x()) < 1e-6);
    CHECK(std::abs(py - cloud.pixels[i].y()) < 1e-6);
    CHECK(std::abs(p.z() - m.value(uu, vv)) <= 1e-6 * m.value(uu, vv));
  }
}

TEST_CASE("intrinsics validation") {
  CameraIntrinsics k{0.0, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(k.validate(), Error);
}
