#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace physworld::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

// Grid description for batched SDF sampling; see scene::sample_sdf.
struct GridView {
  const double* values = nullptr;
  std::uint32_t nx = 0, ny = 0, nz = 0;  // each >= 2
  double origin[3] = {0, 0, 0};
  double voxel = 1.0;
};

// Hot inner loops of the MLP, its optimizer and the SDF sampler. Every
// variant evaluates the same operations in the same order without fused
// multiply-add, so results are bitwise identical across variants.
struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // Dot product accumulated in four interleaved lanes, reduced as
  // (l0 + l1) + (l2 + l3), then the scalar tail in order.
  double (*dot)(const double* a, const double* b, std::size_t n);
  // Adam moment update and parameter step:
  //   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g g
  //   p -= step * m / (sqrt(v * vscale) + eps)
  void (*adam)(double* p, double* m, double* v, const double* g, std::size_t n, double b1,
               double b2, double step, double vscale, double eps);
  // Trilinear SDF sample with conservative outside extension, for points
  // given as separate x/y/z arrays.
  void (*sdf_sample)(const GridView& grid, const double* x, const double* y, const double* z,
                     double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the binary or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

// Table chosen at startup: AVX2 when available unless PW_KERNELS=scalar.
const KernelTable& active();
// Overrides the runtime choice (tests, benchmarks). Returns false if the
// requested variant is unavailable.
bool select(Isa isa);

}  // namespace physworld::kernels
