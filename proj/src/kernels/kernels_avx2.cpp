#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

namespace physworld::kernels::detail {

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) sum = sum + a[i] * b[i];
  return sum;
}

void adam_avx2(double* p, double* m, double* v, const double* g, std::size_t n, double b1,
               double b2, double step, double vscale, double eps) {
  const __m256d vb1 = _mm256_set1_pd(b1);
  const __m256d vb2 = _mm256_set1_pd(b2);
  const __m256d vc1 = _mm256_set1_pd(1.0 - b1);
  const __m256d vc2 = _mm256_set1_pd(1.0 - b2);
  const __m256d vstep = _mm256_set1_pd(step);
  const __m256d vvs = _mm256_set1_pd(vscale);
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vc1, vg));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vc2, _mm256_mul_pd(vg, vg)));
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, vvs)), veps);
    const __m256d vp =
        _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_div_pd(_mm256_mul_pd(vstep, vm), denom));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    _mm256_storeu_pd(p + i, vp);
  }
  if (i < n) adam_scalar(p + i, m + i, v + i, g + i, n - i, b1, b2, step, vscale, eps);
}

namespace {

inline __m256d lerp(__m256d a, __m256d b, __m256d t) {
  return _mm256_add_pd(a, _mm256_mul_pd(_mm256_sub_pd(b, a), t));
}

inline __m256d gather(const double* base, __m128i index) {
  return _mm256_i32gather_pd(base, index, 8);
}

}  // namespace

void sdf_sample_avx2(const GridView& grid, const double* x, const double* y, const double* z,
                     double* out, std::size_t n) {
  const double h = grid.voxel;
  const __m256d vh = _mm256_set1_pd(h);
  const double* src[3] = {x, y, z};
  const std::uint32_t cells[3] = {grid.nx - 1, grid.ny - 1, grid.nz - 1};
  __m256d lo[3], hi[3], top[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = _mm256_set1_pd(grid.origin[a]);
    hi[a] = _mm256_set1_pd(grid.origin[a] + h * double(cells[a]));
    top[a] = _mm256_set1_pd(double(cells[a] - 1));
  }
  const __m128i sy = _mm_set1_epi32(static_cast<int>(grid.nx));
  const __m128i sz = _mm_set1_epi32(static_cast<int>(grid.nx * grid.ny));
  const __m128i one = _mm_set1_epi32(1);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d2 = _mm256_setzero_pd();
    __m256d f[3];
    __m128i idx[3];
    for (int a = 0; a < 3; ++a) {
      const __m256d p = _mm256_loadu_pd(src[a] + i);
      const __m256d c = _mm256_min_pd(_mm256_max_pd(p, lo[a]), hi[a]);
      const __m256d diff = _mm256_sub_pd(p, c);
      d2 = _mm256_add_pd(d2, _mm256_mul_pd(diff, diff));
      const __m256d g = _mm256_div_pd(_mm256_sub_pd(c, lo[a]), vh);
      const __m256d i0 = _mm256_min_pd(_mm256_floor_pd(g), top[a]);
      idx[a] = _mm256_cvttpd_epi32(i0);
      f[a] = _mm256_sub_pd(g, i0);
    }
    const __m128i i000 = _mm_add_epi32(
        _mm_add_epi32(_mm_mullo_epi32(idx[2], sz), _mm_mullo_epi32(idx[1], sy)), idx[0]);
    const double* v = grid.values;
    const __m128i i010 = _mm_add_epi32(i000, sy);
    const __m128i i001 = _mm_add_epi32(i000, sz);
    const __m128i i011 = _mm_add_epi32(i001, sy);
    const __m256d v000 = gather(v, i000), v100 = gather(v, _mm_add_epi32(i000, one));
    const __m256d v010 = gather(v, i010), v110 = gather(v, _mm_add_epi32(i010, one));
    const __m256d v001 = gather(v, i001), v101 = gather(v, _mm_add_epi32(i001, one));
    const __m256d v011 = gather(v, i011), v111 = gather(v, _mm_add_epi32(i011, one));
    const __m256d c00 = lerp(v000, v100, f[0]);
    const __m256d c10 = lerp(v010, v110, f[0]);
    const __m256d c01 = lerp(v001, v101, f[0]);
    const __m256d c11 = lerp(v011, v111, f[0]);
    const __m256d c0 = lerp(c00, c10, f[1]);
    const __m256d c1 = lerp(c01, c11, f[1]);
    _mm256_storeu_pd(out + i, _mm256_add_pd(lerp(c0, c1, f[2]), _mm256_sqrt_pd(d2)));
  }
  for (; i < n; ++i) out[i] = sdf_sample_one(grid, x[i], y[i], z[i]);
}

}  // namespace physworld::kernels::detail
