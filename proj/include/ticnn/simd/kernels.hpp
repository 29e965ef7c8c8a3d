#pragma once

// Data-parallel inner loops shared by the layer algebra.
//
// Every kernel has a scalar reference implementation; vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled when the toolchain
// supports them and selected at runtime after a CPU feature probe. The
// environment variable TICNN_SIMD=scalar|avx2|neon forces a backend.
//
// Elementwise kernels (axpy) produce the same per-element operation sequence
// regardless of an element's position and backend (unfused multiply, then add),
// so axpy results are bit-identical across backends. Reductions
// (dot, sum) use lane-parallel accumulators, so SIMD and scalar results agree
// to rounding but not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace ticnn::simd {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b) noexcept;

struct KernelTable {
  Backend backend;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
};

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace scalar

#if defined(TICNN_HAVE_AVX2)
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace avx2
#endif

#if defined(TICNN_HAVE_NEON)
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace neon
#endif

// Backends compiled in and supported by the running CPU. Always contains
// Backend::scalar.
std::vector<Backend> available_backends();

const KernelTable& kernels_for(Backend b);

// Currently selected table.
const KernelTable& active();

// Throws ConfigError if the backend is unavailable on this machine.
void select_backend(Backend b);

// Span conveniences over the active table.
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

}  // namespace ticnn::simd
