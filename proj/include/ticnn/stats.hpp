#pragma once

#include <optional>
#include <span>
#include <vector>

namespace ticnn::stats {

// Product-moment correlation. nullopt marks a degenerate input (length < 2 or
// a constant sequence), never a silent zero. Throws DimensionError on length
// mismatch.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks (ties share the mean rank).
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// 1-based average ranks.
std::vector<double> average_ranks(std::span<const double> x);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

// Throws DataError on empty input.
MeanStd mean_std(std::span<const double> x);

// Point-by-point comparison of two curves.
struct DiffStats {
  double mu = 0.0;     // mean absolute difference
  double sigma = 0.0;  // population std of absolute differences
  std::optional<double> spearman;
  std::optional<double> pearson;
};

DiffStats diff_stats(std::span<const double> a, std::span<const double> b);

}  // namespace ticnn::stats
