#pragma once

// Deep-feature perceptual distance over a built backbone, its tap
// configurations for the Base/Multi/Flat heads, and the four response-curve
// methodologies (direct distance, cumulative sum, MLDS simulation, sequential).

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ticnn/model.hpp"
#include "ticnn/stats.hpp"
#include "ticnn/tensor.hpp"

namespace ticnn {

struct MetricConfig {
  std::shared_ptr<const Model> backbone;
  // Layer indices whose activations enter the distance; kNetworkInput taps the image.
  std::vector<int> taps;
  // Per tap, one non-negative weight per channel.
  std::vector<std::vector<double>> weights;
  bool unit_normalize = true;
};

// Throws ConfigError on invalid taps, weight counts or negative weights.
void validate(const MetricConfig& config);

// Tap activations of one image (batch of 1), unit-normalized across channels
// at every spatial position when the config asks for it.
using FeatureSet = std::vector<Tensor>;
FeatureSet extract_features(const MetricConfig& config, const Tensor& image);

// sum over taps of mean over positions of sum_c w_c (fx_c - fy_c)^2.
double feature_distance(const MetricConfig& config, const FeatureSet& fx, const FeatureSet& fy);
double lpips_distance(const MetricConfig& config, const Tensor& x, const Tensor& y);

enum class MetricVariant { lbase, lmulti, lflat };

std::string_view metric_variant_name(MetricVariant v) noexcept;
MetricVariant parse_metric_variant(std::string_view name);

// LBase taps every stage output; LMulti taps the per-stage GAP vectors (needs
// a Multi or Flat backbone); LFlat taps the final map plus the GAP vectors
// (needs a Flat backbone). Weights default to 1.
MetricConfig variant_metric(MetricVariant variant, std::shared_ptr<const Model> backbone);

enum class CurveMethod { orig_dist, cumsum, mlds, sequential };

std::string_view curve_method_name(CurveMethod m) noexcept;
CurveMethod parse_curve_method(std::string_view name);

struct ResponseCurve {
  std::vector<double> levels;  // distortion magnitude in degrees
  std::vector<double> values;
  bool degenerate = false;     // MLDS on a flat scale: values are all zero
};

struct MLDSConfig {
  double sigma = 0.29;
  std::size_t trials = 2000;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 50000;
  double gradient_tolerance = 1e-7;
};

void validate(const MLDSConfig& config);

// One simulated trial: was the interval (k, l) judged larger than (i, j)?
struct Judgment {
  std::size_t i = 0, j = 0, k = 0, l = 0;
  bool second_larger = false;
};

// Quadruples i<j<k<l drawn uniformly; P(second larger) =
// Phi(((psi_l - psi_k) - (psi_j - psi_i)) / sigma). Deterministic per seed.
// Throws ConfigError for fewer than 4 levels.
std::vector<Judgment> simulate_mlds(std::span<const double> true_scale, const MLDSConfig& config);

// Bernoulli log-likelihood of judgments under a candidate scale.
double mlds_log_likelihood(std::span<const Judgment> judgments, std::span<const double> scale,
                           double sigma);

struct MLDSFit {
  std::vector<double> scale;  // anchored: scale.front() == 0, scale.back() == 1
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

// Maximum-likelihood scale with sigma fixed, monotone through cumulative
// softplus increments, fitted by BFGS ascent with backtracking. Throws
// NumericalError with the final gradient norm when the iteration cap is hit.
MLDSFit fit_mlds(std::span<const Judgment> judgments, std::size_t num_levels, const MLDSConfig& config);

// Gradient of the fit objective with respect to the unconstrained increment
// parameters (one per consecutive level pair); exposed for gradient checks.
double mlds_objective(std::span<const Judgment> judgments, std::span<const double> theta,
                      double sigma, std::vector<double>* gradient);
std::vector<double> mlds_scale_from_theta(std::span<const double> theta);

// Distance between images a and b of the ordered sequence.
using PairDistance = std::function<double(std::size_t a, std::size_t b)>;

inline constexpr double kLevelStepDegrees = 0.07;

// Builds the response curve over `count` images (index 0 is the pristine
// reference). The MLDS method simulates an observer whose internal scale is
// the direct-distance curve normalized by its maximum, then fits it.
ResponseCurve build_response_curve(CurveMethod method, std::size_t count, const PairDistance& distance,
                                   const std::optional<MLDSConfig>& mlds = std::nullopt,
                                   double level_step = kLevelStepDegrees);

ResponseCurve build_response_curve(CurveMethod method, std::span<const Tensor> images,
                                   const MetricConfig& metric,
                                   const std::optional<MLDSConfig>& mlds = std::nullopt,
                                   double level_step = kLevelStepDegrees);

// Both curves divided by their own maxima, then mean/std of the absolute
// difference plus Spearman and Pearson. Throws DataError on a non-positive max.
stats::DiffStats compare_curves(const ResponseCurve& model_curve, const ResponseCurve& reference_curve);

}  // namespace ticnn
