#include <atomic>
#include <cstdlib>
#include <string>

#include "ticnn/error.hpp"
#include "ticnn/simd/kernels.hpp"

namespace ticnn::simd {

namespace {

constexpr KernelTable kScalar{Backend::scalar, &scalar::axpy, &scalar::dot, &scalar::sum};
#if defined(TICNN_HAVE_AVX2)
constexpr KernelTable kAvx2{Backend::avx2, &avx2::axpy, &avx2::dot, &avx2::sum};
#endif
#if defined(TICNN_HAVE_NEON)
constexpr KernelTable kNeon{Backend::neon, &neon::axpy, &neon::dot, &neon::sum};
#endif

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(TICNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(TICNN_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* best_table() {
  if (const char* env = std::getenv("TICNN_SIMD")) {
    const std::string want(env);
    for (Backend b : available_backends()) {
      if (backend_name(b) == want) return &kernels_for(b);
    }
  }
  const auto all = available_backends();
  return &kernels_for(all.back());
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{best_table()};
  return slot;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out{Backend::scalar};
  for (Backend b : {Backend::avx2, Backend::neon}) {
    if (cpu_supports(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& kernels_for(Backend b) {
  if (!cpu_supports(b)) {
    throw ConfigError("SIMD backend '" + std::string(backend_name(b)) +
                      "' is not available on this machine");
  }
  switch (b) {
#if defined(TICNN_HAVE_AVX2)
    case Backend::avx2:
      return kAvx2;
#endif
#if defined(TICNN_HAVE_NEON)
    case Backend::neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void select_backend(Backend b) { active_slot().store(&kernels_for(b), std::memory_order_release); }

}  // namespace ticnn::simd
