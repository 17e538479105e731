#pragma once

// Per-sample gradient-sign attacks (FGSM and BIM), untargeted and targeted,
// constrained to the L-infinity ball of radius eps around the original
// input. z-normalized series have no natural value range, so no further
// clipping is applied.

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/net.hpp"
#include "tsadv/parallel.hpp"

namespace tsadv {

enum class AttackMethod { fgsm, bim };

struct AttackConfig {
  double eps_max = 0.1;
  int steps = 10;       // N, BIM only
  double alpha = 0.05;  // BIM step size, conventionally eps_max / 2
  AttackMode mode = AttackMode::untargeted;
  AttackMethod method = AttackMethod::fgsm;
};

// steps/alpha constraints apply to BIM only; alpha > eps_max is suspicious
// but allowed.
inline std::optional<std::string> validate_attack_config(const AttackConfig& cfg) {
  if (cfg.eps_max < 0.0) throw std::invalid_argument("AttackConfig: eps_max must be >= 0");
  if (cfg.method == AttackMethod::bim) {
    if (cfg.steps < 1) throw std::invalid_argument("AttackConfig: steps must be >= 1");
    if (cfg.alpha <= 0.0) throw std::invalid_argument("AttackConfig: alpha must be positive");
    if (cfg.alpha > cfg.eps_max)
      return "attack config: alpha (" + std::to_string(cfg.alpha) + ") exceeds eps_max (" +
             std::to_string(cfg.eps_max) + ")";
  }
  return std::nullopt;
}

struct AdversarialResult {
  LabeledSeries original;
  std::vector<double> adversarial;
  int pred_before = 0;
  int pred_after = 0;
  std::optional<int> target;
  bool success = false;
  double linf_norm = 0.0;
};

// Componentwise sign with sign(0) = 0.
inline std::vector<double> sign_vector(const std::vector<double>& v) {
  std::vector<double> s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
  return s;
}

// Componentwise min{origin + eps, max{candidate, origin - eps}}.
inline std::vector<double> clip_to_eps_ball(const std::vector<double>& candidate, const std::vector<double>& origin,
                                            double eps) {
  if (candidate.size() != origin.size())
    throw std::invalid_argument("clip_to_eps_ball: length mismatch");
  std::vector<double> out(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i)
    out[i] = std::min(origin[i] + eps, std::max(candidate[i], origin[i] - eps));
  return out;
}

inline double linf_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace detail {

inline void check_target(const LabeledSeries& sample, AttackMode mode, std::optional<int> target) {
  if (mode == AttackMode::targeted) {
    if (!target) throw std::invalid_argument("targeted attack requires a target class");
    if (*target == sample.label)
      throw std::invalid_argument("targeted attack with target equal to the true label is ill-posed");
  }
}

inline AdversarialResult make_result(const Classifier& clf, const LabeledSeries& sample,
                                     std::vector<double> adversarial, AttackMode mode, std::optional<int> target,
                                     int pred_before) {
  AdversarialResult r;
  r.original = sample;
  r.pred_before = pred_before;
  r.pred_after = predict(clf, adversarial);
  r.target = target;
  r.linf_norm = linf_distance(adversarial, sample.values);
  r.adversarial = std::move(adversarial);
  r.success = mode == AttackMode::targeted ? r.pred_after == *target : r.pred_after != sample.label;
  return r;
}

}  // namespace detail

// Single gradient-sign step: x + eps * sign(grad). Untargeted ascends the
// cross-entropy at the true label; targeted descends it toward the target.
inline AdversarialResult fgsm(const Classifier& clf, const LabeledSeries& sample, double eps, AttackMode mode,
                              std::optional<int> target = std::nullopt) {
  if (eps < 0.0) throw std::invalid_argument("fgsm: eps must be >= 0");
  detail::check_target(sample, mode, target);
  const int grad_class = mode == AttackMode::targeted ? *target : sample.label;
  const auto g = grad_input(clf, sample.values, grad_class, mode);
  const auto s = sign_vector(g);
  std::vector<double> adv(sample.values.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = sample.values[i] + eps * s[i];
  const int pred_before = predict(clf, sample.values);
  return detail::make_result(clf, sample, std::move(adv), mode, target, pred_before);
}

// N iterated alpha-sized sign steps, the gradient re-evaluated at each
// iterate, clipped to the eps ball around the original input after every
// step.
inline AdversarialResult bim(const Classifier& clf, const LabeledSeries& sample, const AttackConfig& cfg,
                             std::optional<int> target = std::nullopt) {
  if (cfg.method != AttackMethod::bim) throw std::invalid_argument("bim: config method is not bim");
  validate_attack_config(cfg);
  detail::check_target(sample, cfg.mode, target);
  const int grad_class = cfg.mode == AttackMode::targeted ? *target : sample.label;

  std::vector<double> x = sample.values;
  for (int n = 0; n < cfg.steps; ++n) {
    const auto g = grad_input(clf, x, grad_class, cfg.mode);
    const auto s = sign_vector(g);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += cfg.alpha * s[i];
    x = clip_to_eps_ball(x, sample.values, cfg.eps_max);
  }
  const int pred_before = predict(clf, sample.values);
  return detail::make_result(clf, sample, std::move(x), cfg.mode, target, pred_before);
}

// Runs the configured attack over a dataset. Untargeted: one result per
// sample. Targeted: one result per (sample, target) pair for every non-true
// target, ordered by sample index then target class.
inline std::vector<AdversarialResult> attack_dataset(const Classifier& clf, const Dataset& ds,
                                                     const AttackConfig& cfg, int threads = 1) {
  if (auto warning = validate_attack_config(cfg))
    std::fprintf(stderr, "warning: %s\n", warning->c_str());

  struct Job {
    std::size_t sample;
    std::optional<int> target;
  };
  std::vector<Job> jobs;
  if (cfg.mode == AttackMode::untargeted) {
    jobs.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) jobs.push_back({i, std::nullopt});
  } else {
    jobs.reserve(ds.size() * (ds.num_classes - 1));
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (int c = 0; c < ds.num_classes; ++c)
        if (c != ds.samples[i].label) jobs.push_back({i, c});
  }

  std::vector<AdversarialResult> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& sample = ds.samples[job.sample];
    try {
      results[j] = cfg.method == AttackMethod::fgsm
                       ? fgsm(clf, sample, cfg.eps_max, cfg.mode, job.target)
                       : bim(clf, sample, cfg, job.target);
    } catch (const std::exception& e) {
      throw std::runtime_error("attack failed on sample " + std::to_string(job.sample) + ": " + e.what());
    }
  });
  return results;
}

// The attacked samples as a dataset (labels keep the true labels), suitable
// for UCR-format export.
inline Dataset adversarial_dataset(const Dataset& source, const std::vector<AdversarialResult>& results) {
  Dataset out;
  out.name = source.name + "_adv";
  out.num_classes = source.num_classes;
  out.series_length = source.series_length;
  out.split = source.split;
  out.samples.reserve(results.size());
  for (const auto& r : results) out.samples.push_back({r.adversarial, r.original.label});
  return out;
}

}  // namespace tsadv
