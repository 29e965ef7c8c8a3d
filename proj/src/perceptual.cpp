#include "ticnn/perceptual.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "parallel.hpp"
#include "ticnn/error.hpp"
#include "ticnn/rng.hpp"

namespace ticnn {

namespace {

constexpr double kNormEps = 1e-10;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::size_t tap_channels(const ArchitectureSpec& spec, const std::vector<Shape>& shapes, int tap) {
  return tap == kNetworkInput ? spec.input_channels : shapes[static_cast<std::size_t>(tap)].c;
}

// Normalizes each position's channel vector to unit length.
void unit_normalize(Tensor& t) {
  const auto s = t.shape();
  const std::size_t hw = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    double* base = t.data().data() + n * s.sample();
    for (std::size_t p = 0; p < hw; ++p) {
      double ss = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) ss += base[c * hw + p] * base[c * hw + p];
      const double inv = 1.0 / (std::sqrt(ss) + kNormEps);
      for (std::size_t c = 0; c < s.c; ++c) base[c * hw + p] *= inv;
    }
  }
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// log Phi(z), accurate far into the lower tail.
double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(std_normal_cdf(z));
  const double z2 = z * z;
  // Asymptotic series of the Mills ratio.
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

// d/dz log Phi(z) = phi(z) / Phi(z).
double mills(double z) {
  const double log_pdf = -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  return std::exp(log_pdf - log_normal_cdf(z));
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double judgment_z(const Judgment& q, std::span<const double> psi, double sigma) {
  return ((psi[q.l] - psi[q.k]) - (psi[q.j] - psi[q.i])) / sigma;
}

void check_judgments(std::span<const Judgment> judgments, std::size_t levels) {
  for (const auto& q : judgments) {
    if (!(q.i < q.j && q.j < q.k && q.k < q.l && q.l < levels)) {
      throw DataError("judgment (" + std::to_string(q.i) + ", " + std::to_string(q.j) + ", " +
                      std::to_string(q.k) + ", " + std::to_string(q.l) +
                      ") is not an ordered quadruple below " + std::to_string(levels));
    }
  }
}

}  // namespace

void validate(const MetricConfig& config) {
  if (!config.backbone) throw ConfigError("metric has no backbone");
  const auto& spec = config.backbone->spec;
  if (config.taps.empty()) throw ConfigError("metric has no taps");
  if (config.weights.size() != config.taps.size()) {
    throw ConfigError("metric has " + std::to_string(config.weights.size()) + " weight vectors for " +
                      std::to_string(config.taps.size()) + " taps");
  }
  const auto shapes = infer_shapes(spec);
  for (std::size_t t = 0; t < config.taps.size(); ++t) {
    const int tap = config.taps[t];
    if (tap < kNetworkInput || tap >= static_cast<int>(spec.layers.size())) {
      throw ConfigError("metric tap " + std::to_string(tap) + " is not a layer index");
    }
    const std::size_t c = tap_channels(spec, shapes, tap);
    if (config.weights[t].size() != c) {
      throw ConfigError("tap " + std::to_string(tap) + " has " + std::to_string(c) + " channels but " +
                        std::to_string(config.weights[t].size()) + " weights");
    }
    for (double w : config.weights[t]) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ConfigError("metric weights must be finite and non-negative (tap " + std::to_string(tap) + ")");
      }
    }
  }
}

FeatureSet extract_features(const MetricConfig& config, const Tensor& image) {
  const auto expected = config.backbone->spec.input_shape(1);
  if (image.shape() != expected) {
    throw DimensionError("input", "metric input " + to_string(image.shape()) + ", backbone expects " +
                                      to_string(expected));
  }
  const auto cache = forward(*config.backbone, image);
  FeatureSet out;
  out.reserve(config.taps.size());
  for (int tap : config.taps) {
    Tensor f = tap == kNetworkInput ? cache.input : cache.outputs[static_cast<std::size_t>(tap)];
    if (config.unit_normalize) unit_normalize(f);
    out.push_back(std::move(f));
  }
  return out;
}

double feature_distance(const MetricConfig& config, const FeatureSet& fx, const FeatureSet& fy) {
  if (fx.size() != config.taps.size() || fy.size() != config.taps.size()) {
    throw DimensionError("taps", "feature sets do not match the metric taps");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < fx.size(); ++t) {
    const auto s = fx[t].shape();
    if (fy[t].shape() != s) {
      throw DimensionError("features", to_string(s) + " vs " + to_string(fy[t].shape()));
    }
    const std::size_t hw = s.plane();
    const auto& w = config.weights[t];
    double acc = 0.0;
    for (std::size_t c = 0; c < s.c; ++c) {
      const auto a = fx[t].plane(0, c);
      const auto b = fy[t].plane(0, c);
      double sq = 0.0;
      for (std::size_t p = 0; p < hw; ++p) sq += (a[p] - b[p]) * (a[p] - b[p]);
      acc += w[c] * sq;
    }
    total += acc / static_cast<double>(hw);
  }
  return total;
}

double lpips_distance(const MetricConfig& config, const Tensor& x, const Tensor& y) {
  validate(config);
  if (x.shape() != y.shape()) {
    throw DimensionError("input", to_string(x.shape()) + " vs " + to_string(y.shape()));
  }
  return feature_distance(config, extract_features(config, x), extract_features(config, y));
}

std::string_view metric_variant_name(MetricVariant v) noexcept {
  switch (v) {
    case MetricVariant::lbase: return "lbase";
    case MetricVariant::lmulti: return "lmulti";
    case MetricVariant::lflat: return "lflat";
  }
  return "?";
}

MetricVariant parse_metric_variant(std::string_view name) {
  const auto s = lower(name);
  if (s == "lbase") return MetricVariant::lbase;
  if (s == "lmulti") return MetricVariant::lmulti;
  if (s == "lflat") return MetricVariant::lflat;
  throw ConfigError("unknown metric variant '" + std::string(name) + "' (expected lbase, lmulti or lflat)");
}

MetricConfig variant_metric(MetricVariant variant, std::shared_ptr<const Model> backbone) {
  if (!backbone) throw ConfigError("metric has no backbone");
  const auto& spec = backbone->spec;
  std::vector<int> gaps;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::gap) gaps.push_back(static_cast<int>(i));
  }
  MetricConfig config;
  config.backbone = backbone;
  switch (variant) {
    case MetricVariant::lbase:
      config.taps = spec.stage_outputs;
      break;
    case MetricVariant::lmulti:
      if (spec.variant != Variant::multi && spec.variant != Variant::flat) {
        throw ConfigError("lmulti needs a multi or flat backbone, got " + std::string(variant_name(spec.variant)));
      }
      config.taps = gaps;
      break;
    case MetricVariant::lflat:
      if (spec.variant != Variant::flat) {
        throw ConfigError("lflat needs a flat backbone, got " + std::string(variant_name(spec.variant)));
      }
      if (spec.stage_outputs.empty()) throw ConfigError("backbone has no stage outputs");
      config.taps.push_back(spec.stage_outputs.back());
      config.taps.insert(config.taps.end(), gaps.begin(), gaps.end());
      break;
  }
  if (config.taps.empty()) throw ConfigError("backbone offers no taps for " + std::string(metric_variant_name(variant)));
  const auto shapes = infer_shapes(spec);
  for (int tap : config.taps) config.weights.emplace_back(tap_channels(spec, shapes, tap), 1.0);
  return config;
}

std::string_view curve_method_name(CurveMethod m) noexcept {
  switch (m) {
    case CurveMethod::orig_dist: return "origdist";
    case CurveMethod::cumsum: return "cumsum";
    case CurveMethod::mlds: return "mlds";
    case CurveMethod::sequential: return "sequential";
  }
  return "?";
}

CurveMethod parse_curve_method(std::string_view name) {
  const auto s = lower(name);
  if (s == "origdist" || s == "orig_dist") return CurveMethod::orig_dist;
  if (s == "cumsum") return CurveMethod::cumsum;
  if (s == "mlds") return CurveMethod::mlds;
  if (s == "sequential") return CurveMethod::sequential;
  throw ConfigError("unknown curve method '" + std::string(name) +
                    "' (expected origdist, cumsum, mlds or sequential)");
}

void validate(const MLDSConfig& config) {
  if (!(config.sigma > 0.0) || !std::isfinite(config.sigma)) throw ConfigError("mlds sigma must be > 0");
  if (config.trials < 1) throw ConfigError("mlds trials must be >= 1");
  if (config.max_iterations < 1) throw ConfigError("mlds iteration cap must be >= 1");
  if (!(config.gradient_tolerance > 0.0)) throw ConfigError("mlds gradient tolerance must be > 0");
}

std::vector<Judgment> simulate_mlds(std::span<const double> true_scale, const MLDSConfig& config) {
  validate(config);
  const std::size_t n = true_scale.size();
  if (n < 4) throw ConfigError("mlds needs at least 4 levels, got " + std::to_string(n));
  Rng rng(derive_seed(config.seed, 7));
  std::vector<std::size_t> pool(n);
  std::vector<Judgment> out;
  out.reserve(config.trials);
  for (std::size_t t = 0; t < config.trials; ++t) {
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: the first four slots are a uniform 4-subset.
    for (std::size_t i = 0; i < 4; ++i) {
      std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(n - i))]);
    }
    std::array<std::size_t, 4> q{pool[0], pool[1], pool[2], pool[3]};
    std::sort(q.begin(), q.end());
    Judgment j{q[0], q[1], q[2], q[3], false};
    const double p = std_normal_cdf(judgment_z(j, true_scale, config.sigma));
    j.second_larger = rng.uniform() < p;
    out.push_back(j);
  }
  return out;
}

double mlds_log_likelihood(std::span<const Judgment> judgments, std::span<const double> scale, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("mlds sigma must be > 0");
  check_judgments(judgments, scale.size());
  double ll = 0.0;
  for (const auto& q : judgments) {
    const double z = judgment_z(q, scale, sigma);
    ll += log_normal_cdf(q.second_larger ? z : -z);
  }
  return ll;
}

std::vector<double> mlds_scale_from_theta(std::span<const double> theta) {
  std::vector<double> psi(theta.size() + 1, 0.0);
  for (std::size_t m = 0; m < theta.size(); ++m) psi[m + 1] = psi[m] + softplus(theta[m]);
  const double total = psi.back();
  for (auto& v : psi) v /= total;
  psi.back() = 1.0;
  return psi;
}

double mlds_objective(std::span<const Judgment> judgments, std::span<const double> theta, double sigma,
                      std::vector<double>* gradient) {
  const auto psi = mlds_scale_from_theta(theta);
  const std::size_t n = psi.size();
  std::vector<double> g_psi(n, 0.0);
  double ll = 0.0;
  for (const auto& q : judgments) {
    const double z = judgment_z(q, psi, sigma);
    const double s = q.second_larger ? 1.0 : -1.0;
    ll += log_normal_cdf(s * z);
    if (gradient) {
      const double r = s * mills(s * z) / sigma;
      g_psi[q.l] += r;
      g_psi[q.k] -= r;
      g_psi[q.j] -= r;
      g_psi[q.i] += r;
    }
  }
  if (gradient) {
    double total = 0.0;
    for (double t : theta) total += softplus(t);
    // psi_n = C_n / S with C_n = sum_{m<n} delta_m, so
    // d psi_n / d delta_m = ([m < n] - psi_n) / S.
    double weighted = 0.0;
    for (std::size_t k = 0; k < n; ++k) weighted += g_psi[k] * psi[k];
    gradient->assign(theta.size(), 0.0);
    double tail = 0.0;  // sum_{n > m} g_psi[n]
    for (std::size_t m = theta.size(); m-- > 0;) {
      tail += g_psi[m + 1];
      (*gradient)[m] = sigmoid(theta[m]) / total * (tail - weighted);
    }
  }
  return ll;
}

MLDSFit fit_mlds(std::span<const Judgment> judgments, std::size_t num_levels, const MLDSConfig& config) {
  validate(config);
  if (num_levels < 4) throw ConfigError("mlds needs at least 4 levels, got " + std::to_string(num_levels));
  if (judgments.empty()) throw DataError("mlds fit needs at least one judgment");
  check_judgments(judgments, num_levels);

  const double scale = 1.0 / static_cast<double>(judgments.size());
  std::vector<double> theta(num_levels - 1, 0.0), grad, trial_grad, trial(theta.size());
  auto objective = [&](std::span<const double> t, std::vector<double>& g) {
    const double v = mlds_objective(judgments, t, config.sigma, &g) * scale;
    for (auto& x : g) x *= scale;
    return v;
  };
  auto norm = [](const std::vector<double>& g) {
    double s2 = 0.0;
    for (double x : g) s2 += x * x;
    return std::sqrt(s2);
  };
  const std::size_t dim = theta.size();
  double value = objective(theta, grad);
  auto psi = mlds_scale_from_theta(theta);
  // Inverse-Hessian estimate of the negated objective (BFGS), row-major.
  std::vector<double> h(dim * dim, 0.0);
  auto reset_h = [&](double diag) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) h[i * dim + i] = diag;
  };
  reset_h(1.0);
  std::vector<double> dir(dim), s_vec(dim), y_vec(dim), hy(dim);
  MLDSFit fit;
  fit.gradient_norm = norm(grad);
  bool converged = fit.gradient_norm <= config.gradient_tolerance;
  bool first = true;
  while (!converged && fit.iterations < config.max_iterations) {
    // Ascent direction H g; fall back to the gradient when it is not uphill.
    double slope = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += h[i * dim + j] * grad[j];
      dir[i] = acc;
      slope += acc * grad[i];
    }
    if (!(slope > 0.0)) {
      reset_h(1.0);
      dir = grad;
      slope = fit.gradient_norm * fit.gradient_norm;
    }
    // Armijo backtracking on the mean log-likelihood.
    double step = 1.0, gain = 0.0;
    bool accepted = false;
    for (int back = 0; back < 80 && !accepted; ++back) {
      for (std::size_t m = 0; m < dim; ++m) trial[m] = theta[m] + step * dir[m];
      const double v = objective(trial, trial_grad);
      if (std::isfinite(v) && v >= value + 1e-4 * step * slope) {
        gain = v - value;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    ++fit.iterations;
    if (!accepted) {
      converged = true;  // no ascent left at machine precision
      break;
    }
    double ys = 0.0, yy = 0.0;
    for (std::size_t m = 0; m < dim; ++m) {
      s_vec[m] = trial[m] - theta[m];
      y_vec[m] = grad[m] - trial_grad[m];  // gradient change of the negated objective
      ys += y_vec[m] * s_vec[m];
      yy += y_vec[m] * y_vec[m];
    }
    theta.swap(trial);
    grad.swap(trial_grad);
    value += gain;
    fit.gradient_norm = norm(grad);
    if (ys > 1e-16 * std::max(1.0, yy)) {
      if (first) reset_h(ys / yy);
      first = false;
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / ys;
      double yhy = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += h[i * dim + j] * y_vec[j];
        hy[i] = acc;
        yhy += y_vec[i] * acc;
      }
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
          h[i * dim + j] += -rho * (hy[i] * s_vec[j] + s_vec[i] * hy[j]) +
                            (rho * rho * yhy + rho) * s_vec[i] * s_vec[j];
        }
      }
    }
    auto next_psi = mlds_scale_from_theta(theta);
    double moved = 0.0;
    for (std::size_t n = 0; n < psi.size(); ++n) moved = std::max(moved, std::abs(next_psi[n] - psi[n]));
    psi.swap(next_psi);
    // An increment heading to zero drives its parameter toward -inf, where the
    // gradient decays only slowly; the scale itself is then stationary.
    converged = fit.gradient_norm <= config.gradient_tolerance ||
                (moved <= 1e-12 && gain <= 1e-15 * std::max(1.0, std::abs(value)));
  }
  if (!converged) {
    throw NumericalError("mlds fit did not converge in " + std::to_string(config.max_iterations) +
                         " iterations (gradient norm " + sci(fit.gradient_norm) + ")");
  }
  if (!std::isfinite(value)) throw NumericalError("mlds log-likelihood is not finite");
  fit.scale = mlds_scale_from_theta(theta);
  fit.scale.front() = 0.0;
  fit.scale.back() = 1.0;
  fit.log_likelihood = value / scale;
  return fit;
}

ResponseCurve build_response_curve(CurveMethod method, std::size_t count, const PairDistance& distance,
                                   const std::optional<MLDSConfig>& mlds, double level_step) {
  if (count < 3) throw DataError("a response curve needs at least 3 images, got " + std::to_string(count));
  if (!(level_step > 0.0)) throw ConfigError("level step must be > 0");
  if (method == CurveMethod::mlds && !mlds) throw ConfigError("the mlds curve method needs an mlds config");
  ResponseCurve curve;
  curve.levels.resize(count);
  // Nominal magnitudes, rounded so that e.g. 3 * 0.07 prints as 0.21.
  for (std::size_t n = 0; n < count; ++n) {
    curve.levels[n] = std::round(static_cast<double>(n) * level_step * 1e9) / 1e9;
  }
  curve.values.assign(count, 0.0);

  auto orig = [&] {
    std::vector<double> d(count, 0.0);
    for (std::size_t n = 1; n < count; ++n) d[n] = distance(0, n);
    return d;
  };

  switch (method) {
    case CurveMethod::orig_dist:
      curve.values = orig();
      break;
    case CurveMethod::cumsum: {
      const auto d = orig();
      for (std::size_t n = 1; n < count; ++n) curve.values[n] = curve.values[n - 1] + d[n];
      break;
    }
    case CurveMethod::sequential:
      for (std::size_t n = 1; n < count; ++n) curve.values[n] = curve.values[n - 1] + distance(n - 1, n);
      break;
    case CurveMethod::mlds: {
      auto psi = orig();
      const double top = *std::max_element(psi.begin(), psi.end());
      if (!(top > 0.0)) {
        curve.degenerate = true;
        break;
      }
      for (auto& v : psi) v /= top;
      const auto judgments = simulate_mlds(psi, *mlds);
      curve.values = fit_mlds(judgments, count, *mlds).scale;
      break;
    }
  }
  for (double v : curve.values) {
    if (!std::isfinite(v)) throw NumericalError("response curve has a non-finite value");
  }
  return curve;
}

ResponseCurve build_response_curve(CurveMethod method, std::span<const Tensor> images, const MetricConfig& metric,
                                   const std::optional<MLDSConfig>& mlds, double level_step) {
  validate(metric);
  std::vector<FeatureSet> features(images.size());
  detail::parallel_for(images.size(), 0, [&](std::size_t i) { features[i] = extract_features(metric, images[i]); });
  return build_response_curve(
      method, images.size(),
      [&](std::size_t a, std::size_t b) { return feature_distance(metric, features[a], features[b]); }, mlds,
      level_step);
}

stats::DiffStats compare_curves(const ResponseCurve& model_curve, const ResponseCurve& reference_curve) {
  const auto& a = model_curve.values;
  const auto& b = reference_curve.values;
  if (a.size() != b.size()) {
    throw DimensionError("levels", std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw DataError("cannot compare empty curves");
  const double ma = *std::max_element(a.begin(), a.end());
  const double mb = *std::max_element(b.begin(), b.end());
  if (!(ma > 0.0)) throw DataError("model curve has a non-positive maximum");
  if (!(mb > 0.0)) throw DataError("reference curve has a non-positive maximum");
  std::vector<double> na(a.size()), nb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    na[i] = a[i] / ma;
    nb[i] = b[i] / mb;
  }
  return stats::diff_stats(na, nb);
}

}  // namespace ticnn
