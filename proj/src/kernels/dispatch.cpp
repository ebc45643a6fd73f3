#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace physworld::kernels {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::kScalar, detail::axpy_scalar, detail::dot_scalar,
                                 detail::adam_scalar, detail::sdf_sample_scalar};
  return table;
}

const KernelTable* avx2_kernels() {
#if defined(PHYSWORLD_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  static const KernelTable table{Isa::kAvx2, detail::axpy_avx2, detail::dot_avx2,
                                 detail::adam_avx2, detail::sdf_sample_avx2};
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_choice() {
  if (const char* env = std::getenv("PW_KERNELS"); env && std::string(env) == "scalar") {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_choice()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::kAvx2 ? avx2_kernels() : &scalar_kernels();
  if (!t) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace physworld::kernels
