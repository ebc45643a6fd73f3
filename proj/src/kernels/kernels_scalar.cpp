#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace physworld::kernels::detail {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) lane[l] = lane[l] + a[i + l] * b[i + l];
  }
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) sum = sum + a[i] * b[i];
  return sum;
}

void adam_scalar(double* p, double* m, double* v, const double* g, std::size_t n, double b1,
                 double b2, double step, double vscale, double eps) {
  const double c1 = 1.0 - b1;
  const double c2 = 1.0 - b2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + c1 * g[i];
    v[i] = b2 * v[i] + c2 * (g[i] * g[i]);
    p[i] = p[i] - step * m[i] / (std::sqrt(v[i] * vscale) + eps);
  }
}

double sdf_sample_one(const GridView& grid, double px, double py, double pz) {
  const double h = grid.voxel;
  const double hi[3] = {grid.origin[0] + h * double(grid.nx - 1),
                        grid.origin[1] + h * double(grid.ny - 1),
                        grid.origin[2] + h * double(grid.nz - 1)};
  const double p[3] = {px, py, pz};
  const std::uint32_t cells[3] = {grid.nx - 1, grid.ny - 1, grid.nz - 1};
  double d2 = 0.0;
  double f[3];
  std::uint32_t base[3];
  for (int a = 0; a < 3; ++a) {
    // Same operand order as _mm256_max_pd / _mm256_min_pd.
    const double raised = p[a] > grid.origin[a] ? p[a] : grid.origin[a];
    const double c = raised < hi[a] ? raised : hi[a];
    const double diff = p[a] - c;
    d2 = d2 + diff * diff;
    const double g = (c - grid.origin[a]) / h;
    double i0 = std::floor(g);
    const double top = double(cells[a] - 1);
    i0 = i0 < top ? i0 : top;
    base[a] = static_cast<std::uint32_t>(i0);
    f[a] = g - i0;
  }
  const std::size_t sx = 1;
  const std::size_t sy = grid.nx;
  const std::size_t sz = std::size_t(grid.nx) * grid.ny;
  const std::size_t i000 = base[2] * sz + base[1] * sy + base[0];
  const double* v = grid.values;
  const double v000 = v[i000], v100 = v[i000 + sx];
  const double v010 = v[i000 + sy], v110 = v[i000 + sy + sx];
  const double v001 = v[i000 + sz], v101 = v[i000 + sz + sx];
  const double v011 = v[i000 + sz + sy], v111 = v[i000 + sz + sy + sx];
  const double c00 = v000 + (v100 - v000) * f[0];
  const double c10 = v010 + (v110 - v010) * f[0];
  const double c01 = v001 + (v101 - v001) * f[0];
  const double c11 = v011 + (v111 - v011) * f[0];
  const double c0 = c00 + (c10 - c00) * f[1];
  const double c1 = c01 + (c11 - c01) * f[1];
  return (c0 + (c1 - c0) * f[2]) + std::sqrt(d2);
}

void sdf_sample_scalar(const GridView& grid, const double* x, const double* y, const double* z,
                       double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sdf_sample_one(grid, x[i], y[i], z[i]);
}

}  // namespace physworld::kernels::detail
