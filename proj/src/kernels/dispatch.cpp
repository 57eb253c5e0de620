#include <atomic>
#include <stdexcept>
#include <string>

#include "topopt/kernels.hpp"

namespace topopt::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(TOPOPT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{&table(detect_best())};
  return ptr;
}

}  // namespace

bool available(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!available(backend)) {
    throw std::runtime_error("kernel backend '" + std::string(name(backend)) +
                             "' is not available on this CPU");
  }
#if defined(TOPOPT_HAVE_AVX2)
  if (backend == Backend::avx2) {
    return detail::avx2_table;
  }
#endif
  return detail::scalar_table;
}

Backend detect_best() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Backend backend) { current().store(&table(backend), std::memory_order_release); }

std::string_view name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace topopt::kernels
