#pragma once

// Dataset-level universal adversarial perturbations: a single vector u,
// bounded by ||u||_inf <= eps_max, that fools the classifier on most samples
// when added to each of them. Built by accumulating per-sample minimal
// fooling steps and projecting back onto the eps ball after each update.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsadv/attack.hpp"
#include "tsadv/dataset.hpp"
#include "tsadv/net.hpp"
#include "tsadv/parallel.hpp"
#include "tsadv/rng.hpp"
#include "tsadv/text.hpp"

namespace tsadv {

struct UniversalPerturbation {
  std::vector<double> u;
  double eps_max = 0.0;
  double train_fooling_ratio = 0.0;
  int epochs_used = 0;
  std::uint64_t seed = 0;
};

// Ascending magnitudes tried for the per-sample minimal fooling step.
struct StepSearchSpec {
  std::vector<double> magnitudes;

  // Geometric grid from eps_max/64 to 4*eps_max. Magnitudes above eps_max
  // are allowed because the accumulated perturbation is projected afterward.
  static StepSearchSpec geometric(double eps_max, int points = 25) {
    if (eps_max <= 0.0) throw std::invalid_argument("StepSearchSpec: eps_max must be positive");
    if (points < 2) throw std::invalid_argument("StepSearchSpec: need at least 2 grid points");
    StepSearchSpec spec;
    const double lo = eps_max / 64.0;
    const double hi = 4.0 * eps_max;
    const double ratio = std::pow(hi / lo, 1.0 / static_cast<double>(points - 1));
    spec.magnitudes.resize(points);
    for (int i = 0; i < points; ++i) spec.magnitudes[i] = lo * std::pow(ratio, static_cast<double>(i));
    spec.magnitudes.back() = hi;
    return spec;
  }
};

inline void validate_search_spec(const StepSearchSpec& spec) {
  if (spec.magnitudes.empty()) throw std::invalid_argument("StepSearchSpec: empty grid");
  double prev = 0.0;
  for (double m : spec.magnitudes) {
    if (!(m > prev)) throw std::invalid_argument("StepSearchSpec: magnitudes must be strictly ascending and positive");
    prev = m;
  }
}

struct UniversalConfig {
  double eps_max = 0.1;
  double r_fooling = 0.9;
  int epoch_fool = 10;
  std::uint64_t seed = 0;
  StepSearchSpec search;  // empty -> geometric(eps_max)
};

// Componentwise clamp to [-eps, +eps]: the L-infinity ball projection.
inline std::vector<double> project_inf_ball(const std::vector<double>& v, double eps) {
  if (eps < 0.0) throw std::invalid_argument("project_inf_ball: eps must be >= 0");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::min(eps, std::max(v[i], -eps));
  return out;
}

// Fraction of samples with argmax f(x + u) != y.
inline double error_ratio(const Classifier& clf, const Dataset& ds, const std::vector<double>& u,
                          int threads = 1) {
  if (ds.empty()) throw std::invalid_argument("error_ratio: empty dataset");
  if (u.size() != static_cast<std::size_t>(ds.series_length))
    throw std::invalid_argument("error_ratio: perturbation length does not match dataset");
  std::vector<char> wrong(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    std::vector<double> x = ds.samples[i].values;
    for (std::size_t t = 0; t < x.size(); ++t) x[t] += u[t];
    wrong[i] = predict(clf, x) != ds.samples[i].label ? 1 : 0;
  });
  std::size_t count = 0;
  for (char w : wrong) count += w;
  return static_cast<double>(count) / static_cast<double>(ds.size());
}

// Smallest grid step m*d, with d the gradient-sign direction evaluated at
// x + u, such that the classifier leaves class y at x + u + m*d. Caller
// guarantees f(x + u) = y. Returns nothing when no grid magnitude fools.
inline std::optional<std::vector<double>> minimal_fooling_step(const Classifier& clf, const std::vector<double>& x,
                                                               int y, const std::vector<double>& u,
                                                               const StepSearchSpec& spec) {
  validate_search_spec(spec);
  std::vector<double> xu(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xu[i] = x[i] + u[i];

  const auto d = sign_vector(grad_input(clf, xu, y, AttackMode::untargeted));
  bool all_zero = true;
  for (double v : d)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) return std::nullopt;

  std::vector<double> candidate(x.size());
  for (double m : spec.magnitudes) {
    for (std::size_t i = 0; i < x.size(); ++i) candidate[i] = xu[i] + m * d[i];
    if (predict(clf, candidate) != y) {
      std::vector<double> step(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) step[i] = m * d[i];
      return step;
    }
  }
  return std::nullopt;
}

// Builds the universal perturbation. Per pass (in a seed-derived shuffle
// order) each sample is skipped when the clean prediction is already wrong,
// when single-step FGSM at eps_max fails to fool the clean sample (cached
// once per sample), or when x + u already fools; otherwise the minimal
// fooling step is added and u is projected back onto the eps ball. Stops as
// soon as the fooling ratio reaches r_fooling, or after epoch_fool passes.
inline UniversalPerturbation compute_universal(const Classifier& clf, const Dataset& ds, UniversalConfig cfg,
                                               int threads = 1) {
  if (ds.empty()) throw std::invalid_argument("compute_universal: empty dataset");
  if (!(cfg.r_fooling > 0.0 && cfg.r_fooling <= 1.0))
    throw std::invalid_argument("compute_universal: r_fooling must be in (0, 1]");
  if (cfg.epoch_fool < 1) throw std::invalid_argument("compute_universal: epoch_fool must be >= 1");
  if (cfg.eps_max <= 0.0) throw std::invalid_argument("compute_universal: eps_max must be positive");
  if (cfg.search.magnitudes.empty()) cfg.search = StepSearchSpec::geometric(cfg.eps_max);
  validate_search_spec(cfg.search);

  const int T = ds.series_length;
  const std::size_t m = ds.size();

  // Per-sample caches: clean prediction correct, and whether clean FGSM at
  // eps_max fools (evaluated once, on the clean input).
  std::vector<char> clean_correct(m, 0), fgsm_fools(m, 0);
  parallel_for(m, threads, [&](std::size_t i) {
    const auto& s = ds.samples[i];
    clean_correct[i] = predict(clf, s.values) == s.label ? 1 : 0;
    if (clean_correct[i]) {
      const auto r = fgsm(clf, s, cfg.eps_max, AttackMode::untargeted);
      fgsm_fools[i] = r.success ? 1 : 0;
    }
  });

  UniversalPerturbation up;
  up.u.assign(T, 0.0);
  up.eps_max = cfg.eps_max;
  up.seed = cfg.seed;

  Rng shuffle_rng(derive_seed(cfg.seed, 0x756e6976ull /* "univ" */));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);

  int pass = 0;
  double ratio = error_ratio(clf, ds, up.u, threads);
  while (ratio < cfg.r_fooling && pass < cfg.epoch_fool) {
    shuffle_rng.shuffle(order);
    for (std::size_t i : order) {
      if (!clean_correct[i]) continue;
      if (!fgsm_fools[i]) continue;
      const auto& s = ds.samples[i];
      std::vector<double> xu(s.values.size());
      for (std::size_t t = 0; t < xu.size(); ++t) xu[t] = s.values[t] + up.u[t];
      if (predict(clf, xu) != s.label) continue;  // already fooled by u

      const auto step = minimal_fooling_step(clf, s.values, s.label, up.u, cfg.search);
      if (!step) continue;
      for (int t = 0; t < T; ++t) up.u[t] += (*step)[t];
      up.u = project_inf_ball(up.u, cfg.eps_max);
    }
    ++pass;
    ratio = error_ratio(clf, ds, up.u, threads);
  }

  up.train_fooling_ratio = ratio;
  up.epochs_used = pass;
  return up;
}

inline UniversalPerturbation compute_universal(const Classifier& clf, const Dataset& ds, double eps_max,
                                               double r_fooling, int epoch_fool, std::uint64_t seed,
                                               int threads = 1) {
  UniversalConfig cfg;
  cfg.eps_max = eps_max;
  cfg.r_fooling = r_fooling;
  cfg.epoch_fool = epoch_fool;
  cfg.seed = seed;
  return compute_universal(clf, ds, std::move(cfg), threads);
}

// --- perturbation file (JSON, values at 17 significant digits) ---

constexpr int kPerturbationFormatVersion = 1;

inline void save_perturbation(const UniversalPerturbation& up, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write perturbation file: " + path.string());
  out << "{\n";
  out << "  \"format_version\": " << kPerturbationFormatVersion << ",\n";
  out << "  \"eps_max\": " << format_g17(up.eps_max) << ",\n";
  out << "  \"seed\": " << up.seed << ",\n";
  out << "  \"T\": " << up.u.size() << ",\n";
  out << "  \"u\": [";
  for (std::size_t i = 0; i < up.u.size(); ++i) out << (i ? "," : "") << format_g17(up.u[i]);
  out << "],\n";
  out << "  \"train_fooling_ratio\": " << format_g17(up.train_fooling_ratio) << ",\n";
  out << "  \"epochs_used\": " << up.epochs_used << "\n";
  out << "}\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline UniversalPerturbation load_perturbation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open perturbation file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt perturbation file " + path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kPerturbationFormatVersion)
      throw std::runtime_error("unsupported perturbation format_version");
    UniversalPerturbation up;
    up.eps_max = doc.at("eps_max").get<double>();
    up.seed = doc.at("seed").get<std::uint64_t>();
    up.u = doc.at("u").get<std::vector<double>>();
    if (up.u.size() != doc.at("T").get<std::size_t>())
      throw std::runtime_error("perturbation length does not match T");
    up.train_fooling_ratio = doc.at("train_fooling_ratio").get<double>();
    up.epochs_used = doc.at("epochs_used").get<int>();
    return up;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt perturbation file " + path.string() + ": " + e.what());
  }
}

}  // namespace tsadv
