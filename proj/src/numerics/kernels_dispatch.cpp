#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"
#include "lunet/error.hpp"

namespace lunet::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(LUNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const char* env = std::getenv("LUNET_SIMD");
  if (env && std::string_view(env) == "scalar") return &scalar_kernels();
  if (const auto* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

const KernelTable* avx2_kernels() {
#if defined(LUNET_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (isa == Isa::scalar) {
    current().store(&scalar_kernels(), std::memory_order_release);
    return;
  }
  const auto* t = avx2_kernels();
  if (!t) throw Error("AVX2 kernels are not available on this build or CPU");
  current().store(t, std::memory_order_release);
}

Isa active_isa() { return &active() == &scalar_kernels() ? Isa::scalar : Isa::avx2; }

}  // namespace lunet::kernels
