// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by number; none runs all eleven. Exit status is the number of
// failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticnn/arch.hpp"
#include "ticnn/io.hpp"
#include "ticnn/layers.hpp"
#include "ticnn/model.hpp"
#include "ticnn/perceptual.hpp"
#include "ticnn/rng.hpp"
#include "ticnn/runner.hpp"
#include "ticnn/stats.hpp"
#include "ticnn/transforms.hpp"

#ifndef TICNN_CLI_PATH
#error "TICNN_CLI_PATH must name the command-line binary"
#endif

namespace {

using namespace ticnn;
namespace fs = std::filesystem;
using json = nlohmann::json;

// Pinned tolerances and budgets.
constexpr double kParamsBudgetSeconds = 1.0;
constexpr double kInvarianceTolerance = 1e-6;
constexpr double kInvarianceBudgetSeconds = 10.0;
constexpr double kEquivarianceTolerance = 1e-12;
constexpr double kPeriodConfidence = 0.3;
constexpr double kAliasingBudgetSeconds = 15.0 * 60.0;
constexpr double kRobustnessMargin = 0.20;
constexpr double kFdEps = 1e-5;
constexpr double kFdTolerance = 1e-4;
constexpr int kFdPoints = 10;
constexpr double kMldsSpearman = 0.99;
constexpr double kStatsTolerance = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : path_(fs::temp_directory_path() / ("ticnn_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double inner(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central differences at kFdPoints random coordinates of x; largest relative error.
double fd_error(Tensor& x, const std::function<double()>& f, const Tensor& analytic, Rng& rng) {
  double worst = 0.0;
  for (int p = 0; p < kFdPoints; ++p) {
    const auto i = static_cast<std::size_t>(rng.below(x.size()));
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

// ---- criteria --------------------------------------------------------------

Outcome parameter_table() {
  const auto start = Clock::now();
  struct Row {
    Variant v;
    std::size_t total, trainable;
  };
  const Row rows[] = {{Variant::base, 19'957'728, 5'243'040},
                      {Variant::multi, 14'950'368, 235'680},
                      {Variant::final_gap, 14'796'768, 82'080},
                      {Variant::flat, 20'193'248, 5'478'560}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rows) {
    const auto c = count_parameters(build_vgg16_variant(r.v, 256, 160));
    ok = ok && c.total == r.total && c.trainable == r.trainable;
    detail += std::string(variant_name(r.v)) + " " + std::to_string(c.total) + "/" + std::to_string(c.trainable) + " ";
  }
  const double t = seconds_since(start);
  return {ok && t < kParamsBudgetSeconds, detail + fmt("in %.3f s", t)};
}

Outcome exact_invariance() {
  const auto start = Clock::now();
  ToyConfig c;
  c.channels = {8, 16};
  c.pooled_stages = 0;
  c.padding = PaddingMode::circular;
  c.input_size = 16;
  const Model m = make_model(build_toy_variant(Variant::final_gap, c), 7);
  Rng rng(11);
  double worst = 0.0;
  for (int image = 0; image < 3; ++image) {
    const auto x = random_tensor(Shape{1, 1, 16, 16}, rng, 0.0, 1.0);
    std::vector<Tensor> shifted;
    for (long dy = 0; dy < 16; ++dy)
      for (long dx = 0; dx < 16; ++dx) shifted.push_back(circular_shift(x, dx, dy));
    const auto ref = logits(m, x);
    const auto all = logits(m, stack_batch(shifted));
    const std::size_t k = ref.size();
    for (std::size_t s = 0; s < shifted.size(); ++s)
      for (std::size_t j = 0; j < k; ++j) worst = std::max(worst, std::abs(all[s * k + j] - ref[j]));
  }
  const double t = seconds_since(start);
  return {worst <= kInvarianceTolerance && t < kInvarianceBudgetSeconds,
          "3 images x 256 shifts, max |dlogit| " + fmt("%.2e", worst) + fmt(" in %.2f s", t)};
}

Outcome equivariance() {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 3 + rng.below(8), w = 3 + rng.below(8);
    const std::size_t k = 1 + 2 * rng.below(std::min(h, w) / 2 + 1);
    const Conv2dParams p{1, k / 2, PaddingMode::circular};
    const auto x = random_tensor(Shape{1, 1 + rng.below(3), h, w}, rng);
    const auto wt = random_tensor(Shape{1 + rng.below(3), x.shape().c, k, k}, rng);
    std::vector<double> b(wt.shape().n);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    const long dx = static_cast<long>(rng.below(2 * w + 1)) - static_cast<long>(w);
    const long dy = static_cast<long>(rng.below(2 * h + 1)) - static_cast<long>(h);
    worst = std::max(worst, max_abs_diff(conv2d(circular_shift(x, dx, dy), wt, b, p),
                                         circular_shift(conv2d(x, wt, b, p), dx, dy)));
  }
  return {worst <= kEquivarianceTolerance, "100 cases, max diff " + fmt("%.2e", worst)};
}

RunConfig config_from(const json& doc) { return parse_run_config(doc.dump()); }

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_text(p));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Outcome aliasing_periodicity() {
  const auto start = Clock::now();
  Scratch dir("aliasing");
  run(config_from({{"schema", kRunSchema},
                   {"experiment", "aliasing"},
                   {"seed", 0},
                   {"output_dir", dir.path().string()},
                   {"model", {{"channels", {8, 16}}}},
                   {"data", {{"train_count", 2000}, {"test_count", 1000}, {"size", 24}}},
                   {"aliasing", {{"ks", {2, 3, 4}}, {"padding", "circular"}}}}));
  bool ok = true;
  std::string detail;
  for (const auto& row : read_csv_rows(dir.path() / "aliasing_report.csv")) {
    const double confidence = io::parse_double(row.at(2));
    ok = ok && row.at(1) == row.at(0) && confidence >= kPeriodConfidence;
    detail += "k=" + row[0] + " period=" + row[1] + fmt(" conf=%.2f; ", confidence);
  }
  const double t = seconds_since(start);
  return {ok && t <= kAliasingBudgetSeconds, detail + fmt("%.1f s", t)};
}

Outcome robustness_ordering() {
  std::map<std::string, double> loss;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Scratch dir("robustness" + std::to_string(seed));
    run(config_from({{"schema", kRunSchema},
                     {"experiment", "grid"},
                     {"seed", seed},
                     {"output_dir", dir.path().string()},
                     {"shared_backbone", true},
                     {"variants", {"base", "multi", "final"}}}));
    for (const auto& row : read_csv_rows(dir.path() / "summary.csv")) loss[row.at(0)] += io::parse_double(row.at(4)) / 3.0;
  }
  const double base = loss["base"];
  const bool ok = loss["multi"] < (1.0 - kRobustnessMargin) * base && loss["final"] < (1.0 - kRobustnessMargin) * base;
  return {ok, "mean loss over 3 seeds: base " + fmt("%.4f", base) + " multi " + fmt("%.4f", loss["multi"]) +
                  " final " + fmt("%.4f", loss["final"])};
}

Outcome gradient_checks() {
  Rng rng(21);
  std::map<std::string, double> worst;
  const auto note = [&](const std::string& op, double e) { worst[op] = std::max(worst[op], e); };

  for (auto mode : {PaddingMode::zero, PaddingMode::circular}) {
    for (std::size_t stride : {1u, 2u}) {
      const Conv2dParams p{stride, 1, mode};
      auto x = random_tensor(Shape{2, 2, 6, 5}, rng);
      auto w = random_tensor(Shape{3, 2, 3, 3}, rng);
      Tensor b = random_tensor(Shape{1, 1, 1, 3}, rng);
      const auto g = random_tensor(conv2d(x, w, b.data(), p).shape(), rng);
      const auto f = [&] { return inner(g, conv2d(x, w, b.data(), p)); };
      const auto grads = conv2d_backward(x, w, g, p);
      note("conv2d", fd_error(x, f, grads.input, rng));
      note("conv2d", fd_error(w, f, grads.weights, rng));
      note("conv2d", fd_error(b, f, Tensor(b.shape(), grads.bias), rng));
    }
  }
  for (auto mode : {PoolMode::max, PoolMode::average}) {
    const PoolSpec spec(2, 2, mode);
    auto x = random_tensor(Shape{2, 2, 6, 7}, rng);
    const auto g = random_tensor(pool2d(x, spec).shape(), rng);
    note(mode == PoolMode::max ? "maxpool" : "avgpool",
         fd_error(x, [&] { return inner(g, pool2d(x, spec)); }, pool2d_backward(x, g, spec), rng));
  }
  auto x = random_tensor(Shape{2, 3, 4, 5}, rng);
  const auto gg = random_tensor(Shape{2, 3, 1, 1}, rng);
  note("gap", fd_error(x, [&] { return inner(gg, global_avg_pool(x)); }, global_avg_pool_backward(x.shape(), gg), rng));
  auto w = random_tensor(Shape{4, 60, 1, 1}, rng);
  Tensor b = random_tensor(Shape{1, 1, 1, 4}, rng);
  const auto gd = random_tensor(Shape{2, 4, 1, 1}, rng);
  const auto fd = [&] { return inner(gd, dense(x, w, b.data())); };
  const auto dg = dense_backward(x, w, gd);
  note("dense", fd_error(x, fd, dg.input, rng));
  note("dense", fd_error(w, fd, dg.weights, rng));
  note("dense", fd_error(b, fd, Tensor(b.shape(), dg.bias), rng));
  const auto gr = random_tensor(x.shape(), rng);
  note("relu", fd_error(x, [&] { return inner(gr, relu(x)); }, relu_backward(x, gr), rng));
  auto z = random_tensor(Shape{3, 5, 1, 1}, rng, -3.0, 3.0);
  const auto gs = random_tensor(z.shape(), rng);
  note("softmax", fd_error(z, [&] { return inner(gs, softmax(z)); }, softmax_backward(softmax(z), gs), rng));
  const std::vector<int> labels3{4, 0, 2};
  note("cross_entropy",
       fd_error(z, [&] { return cross_entropy(z, labels3); }, cross_entropy_grad(z, labels3), rng));
  std::vector<Tensor> parts{random_tensor(Shape{2, 3, 1, 1}, rng), random_tensor(Shape{2, 2, 2, 1}, rng)};
  const auto gc = random_tensor(concat_features(parts).shape(), rng);
  const std::vector<Shape> part_shapes{parts[0].shape(), parts[1].shape()};
  const auto cg = concat_features_backward(part_shapes, gc);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    note("concat", fd_error(parts[i], [&] { return inner(gc, concat_features(parts)); }, cg[i], rng));
  }

  for (Variant v : {Variant::base, Variant::multi, Variant::final_gap, Variant::flat}) {
    for (auto padding : {PaddingMode::zero, PaddingMode::circular}) {
      ToyConfig c;
      c.channels = {3, 4};
      c.input_size = 8;
      c.num_classes = 3;
      c.padding = padding;
      auto model = make_model(build_toy_variant(v, c), 15);
      auto in = random_tensor(Shape{3, 1, 8, 8}, rng);
      const std::vector<int> labels{0, 2, 1};
      const auto loss = [&] { return cross_entropy(logits(model, in), labels); };
      const auto cache = forward(model, in);
      const auto input_grad = backward(model, cache, cross_entropy_grad(cache.logits(), labels), true);
      for (auto& e : model.params.entries()) {
        const Tensor analytic = e.gradient;
        note("model", fd_error(e.value, loss, analytic, rng));
      }
      note("model", fd_error(in, loss, input_grad, rng));
    }
  }
  double overall = 0.0;
  std::string detail;
  for (const auto& [op, e] : worst) {
    overall = std::max(overall, e);
    detail += (detail.empty() ? "" : ", ") + op + fmt(" %.1e", e);
  }
  return {overall <= kFdTolerance, "max rel error " + fmt("%.2e", overall) + " (" + detail + ")"};
}

Outcome mlds_recovery() {
  constexpr std::size_t kLevels = 11;
  std::vector<double> planted(kLevels);
  for (std::size_t n = 0; n < kLevels; ++n) planted[n] = std::pow(static_cast<double>(n) / (kLevels - 1), 0.6);
  bool ok = true;
  double lowest = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MLDSConfig cfg;
    cfg.sigma = 0.29;
    cfg.trials = 2000;
    cfg.seed = seed;
    const auto fit = fit_mlds(simulate_mlds(planted, cfg), kLevels, cfg);
    const double rho = stats::spearman(fit.scale, planted).value_or(0.0);
    lowest = std::min(lowest, rho);
    ok = ok && rho >= kMldsSpearman && fit.scale.front() == 0.0 && fit.scale.back() == 1.0;
  }
  return {ok, "5 seeds, min Spearman " + fmt("%.4f", lowest) + ", anchors 0 and 1"};
}

Outcome mosaic_equivalence() {
  Rng rng(8);
  std::size_t compared = 0;
  for (int image = 0; image < 50; ++image) {
    const auto x = random_tensor(Shape{1, 1, 8, 8}, rng);
    for (long dy = -8; dy <= 8; ++dy)
      for (long dx = -8; dx <= 8; ++dx) {
        if (!(translate_mosaic(x, dx, dy) == circular_shift(x, dx, dy))) {
          return {false, "mismatch at image " + std::to_string(image) + " shift (" + std::to_string(dx) + ", " +
                             std::to_string(dy) + ")"};
        }
        ++compared;
      }
  }
  return {true, std::to_string(compared) + " shifted images bit-identical"};
}

Outcome curve_properties() {
  Rng rng(9);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t count = 3 + rng.below(14);
    std::vector<double> d(count * count);
    for (auto& v : d) v = rng.below(4) == 0 ? 0.0 : rng.uniform(0.0, 3.0);
    const PairDistance dist = [&](std::size_t a, std::size_t b) { return d[a * count + b]; };
    const auto orig = build_response_curve(CurveMethod::orig_dist, count, dist);
    const auto cum = build_response_curve(CurveMethod::cumsum, count, dist);
    const auto seq = build_response_curve(CurveMethod::sequential, count, dist);
    for (std::size_t n = 1; n < count; ++n) {
      ok = ok && seq.values[n] >= seq.values[n - 1] && cum.values[n] >= cum.values[n - 1] &&
           cum.values[n] >= orig.values[n];
    }
  }
  const PairDistance step = [](std::size_t a, std::size_t b) { return b == a + 1 ? 0.25 : 9.0; };
  const auto ramp = build_response_curve(CurveMethod::sequential, 11, step);
  bool linear = true;
  for (std::size_t n = 0; n < ramp.values.size(); ++n) linear = linear && ramp.values[n] == 0.25 * static_cast<double>(n);
  return {ok && linear, std::string("200 random metrics monotone, cumsum >= orig; ramp ") +
                            (linear ? "exactly linear" : "not linear")};
}

std::vector<double> counting_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      less += x[j] < x[i];
      equal += j != i && x[j] == x[i];
    }
    r[i] = 1.0 + less + 0.5 * equal;
  }
  return r;
}

std::optional<double> product_moment(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

Outcome statistics_oracles() {
  Rng rng(1);
  double worst = 0.0;
  bool agree = true;
  int tied = 0;
  const auto draw = [&](std::size_t n, bool ties) {
    std::vector<double> v(n);
    for (auto& x : v) x = ties ? static_cast<double>(rng.below(4)) : rng.uniform(-10.0, 10.0);
    return v;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const bool ties = trial % 2 == 1;
    tied += ties;
    const auto x = draw(n, ties);
    const auto y = draw(n, ties && rng.below(2));
    const auto checks = {std::pair{stats::pearson(x, y), product_moment(x, y)},
                         std::pair{stats::spearman(x, y), product_moment(counting_ranks(x), counting_ranks(y))}};
    for (const auto& [got, want] : checks) {
      agree = agree && got.has_value() == want.has_value();
      if (got && want) worst = std::max(worst, std::abs(*got - *want));
    }
  }
  return {agree && worst <= kStatsTolerance,
          "1000 pairs (" + std::to_string(tied) + " with ties), max diff " + fmt("%.2e", worst)};
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string command = std::string("\"") + TICNN_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(command.c_str());
}

Outcome cli_reproducibility() {
  Scratch dir("repro");
  const std::vector<std::pair<std::string, std::string>> experiments{
      {"params", "params"},
      {"grid", "grid --seed 4 --epochs 2 --train-count 300 --test-count 60 --size 16 --max-shift 2 --step 1"},
      {"aliasing", "aliasing --seed 4 --epochs 1 --train-count 200 --test-count 60 --size 24 --k 2 --k 3"},
      {"curves", "curves --seed 4 --epochs 1 --train-count 200 --test-count 20 --size 24 --steps 6 --trials 300"},
  };
  std::size_t files = 0;
  for (const auto& [name, args] : experiments) {
    std::vector<fs::path> outs;
    for (int r = 0; r < 2; ++r) {
      const auto out = dir.path() / (name + std::to_string(r));
      if (run_cli(args + " --out \"" + out.string() + "\"", dir.path() / (name + ".log")) != 0) {
        return {false, name + " run failed: " + io::read_text(dir.path() / (name + ".log"))};
      }
      outs.push_back(out);
    }
    std::size_t csvs = 0;
    for (const auto& entry : fs::directory_iterator(outs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++csvs;
      const auto other = outs[1] / entry.path().filename();
      if (!fs::exists(other) || io::read_text(entry.path()) != io::read_text(other)) {
        return {false, name + ": " + entry.path().filename().string() + " differs between runs"};
      }
    }
    std::size_t csvs_other = 0;
    for (const auto& entry : fs::directory_iterator(outs[1])) csvs_other += entry.path().extension() == ".csv";
    if (csvs == 0 || csvs != csvs_other) return {false, name + ": CSV sets differ"};
    files += csvs;
  }
  return {true, std::to_string(files) + " CSV files byte-identical across params, grid, aliasing, curves"};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*check)();
};

const Criterion kCriteria[] = {
    {1, "VGG-16 head parameter table", parameter_table},
    {2, "exact invariance of circular conv + GAP", exact_invariance},
    {3, "circular conv equivariance", equivariance},
    {4, "pooling aliasing period", aliasing_periodicity},
    {5, "robustness ordering with shared backbone", robustness_ordering},
    {6, "finite-difference gradients", gradient_checks},
    {7, "MLDS scale recovery", mlds_recovery},
    {8, "mosaic equals circular shift", mosaic_equivalence},
    {9, "response curve properties", curve_properties},
    {10, "Spearman and Pearson oracles", statistics_oracles},
    {11, "CLI reproducibility", cli_reproducibility},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail
              << fmt(" [%.1f s]", seconds_since(start)) << std::endl;
  }
  return failures;
}
