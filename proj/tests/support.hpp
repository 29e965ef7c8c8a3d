#pragma once

// Shared helpers for the unit suites: seeded random tensors, central
// finite-difference gradient checks and scratch directories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "ticnn/rng.hpp"
#include "ticnn/tensor.hpp"

namespace ticnn::testing {

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline constexpr double kFdEps = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
inline constexpr int kFdPoints = 10;

// Compares analytic[i] with the central difference of f at `points` random
// coordinates of x. Returns the largest relative error seen.
inline double check_gradient(Tensor& x, const std::function<double()>& f, const Tensor& analytic, Rng& rng,
                             int points = kFdPoints) {
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    const std::size_t i = static_cast<std::size_t>(rng.below(x.size()));
    const double saved = x[i];
    x[i] = saved + kFdEps;
    const double up = f();
    x[i] = saved - kFdEps;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kFdEps)));
  }
  return worst;
}

// Weighted sum <g, y>, the scalar whose gradient wrt y is g.
inline double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ticnn_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ticnn::testing
