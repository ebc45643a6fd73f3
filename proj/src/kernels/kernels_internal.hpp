#pragma once

#include "physworld/kernels.hpp"

namespace physworld::kernels::detail {

void axpy_scalar(double a, const double* x, double* y, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);
void adam_scalar(double* p, double* m, double* v, const double* g, std::size_t n, double b1,
                 double b2, double step, double vscale, double eps);
double sdf_sample_one(const GridView& grid, double px, double py, double pz);
void sdf_sample_scalar(const GridView& grid, const double* x, const double* y, const double* z,
                       double* out, std::size_t n);

#if defined(PHYSWORLD_HAVE_AVX2)
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
void adam_avx2(double* p, double* m, double* v, const double* g, std::size_t n, double b1,
               double b2, double step, double vscale, double eps);
void sdf_sample_avx2(const GridView& grid, const double* x, const double* y, const double* z,
                     double* out, std::size_t n);
#endif

}  // namespace physworld::kernels::detail
