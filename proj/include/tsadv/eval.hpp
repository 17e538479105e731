#pragma once

// Metrics and experiment protocols: accuracy, targeted success rate, the
// full summary-row pipeline, epsilon sweeps, the subsample generalization
// curve, and the original-vs-defended accuracy curve. All percentages are in
// [0, 100].

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsadv/attack.hpp"
#include "tsadv/dataset.hpp"
#include "tsadv/defense.hpp"
#include "tsadv/net.hpp"
#include "tsadv/train.hpp"
#include "tsadv/universal.hpp"

namespace tsadv {

struct ReportRow {
  std::string dataset;
  double original_accuracy = 0.0;
  double universal_attack_accuracy = 0.0;
  double fgsm_attack_accuracy = 0.0;
  double bim_attack_accuracy = 0.0;
  double fgsm_targeted_success = 0.0;
  double bim_targeted_success = 0.0;
  double advtrained_fgsm_accuracy = 0.0;
  double advtrained_bim_accuracy = 0.0;
};

enum class SweepMetric { accuracy, targeted_success };

struct SweepPoint {
  double eps = 0.0;
  double fgsm_value = 0.0;
  double bim_value = 0.0;
  SweepMetric metric = SweepMetric::accuracy;
};

struct GeneralizationPoint {
  double fraction = 0.0;
  double test_success = 0.0;
};

struct DefenseCurveRow {
  double eps = 0.0;
  std::string model;   // "original" or "defended"
  std::string method;  // "fgsm" or "bim"
  double accuracy = 0.0;
};

// All accuracy-style percentages are computed as 100 * (1 - wrong/M) so that
// accuracy and 100 * error_ratio sum to exactly 100.
inline double accuracy(const Classifier& clf, const Dataset& ds, int threads = 1) {
  if (ds.empty()) throw std::invalid_argument("accuracy: empty dataset");
  const std::vector<double> zero(ds.series_length, 0.0);
  return 100.0 * (1.0 - error_ratio(clf, ds, zero, threads));
}

// Accuracy on the attacked samples (untargeted attack at the given config).
inline double attacked_accuracy(const Classifier& clf, const Dataset& ds, AttackConfig cfg, int threads = 1) {
  cfg.mode = AttackMode::untargeted;
  const auto results = attack_dataset(clf, ds, cfg, threads);
  std::size_t wrong = 0;
  for (const auto& r : results) wrong += r.pred_after != r.original.label ? 1 : 0;
  return 100.0 * (1.0 - static_cast<double>(wrong) / static_cast<double>(results.size()));
}

// Percentage of successful targeted attacks over all (K-1)*M pairs.
inline double targeted_success_rate(const std::vector<AdversarialResult>& results, int num_classes,
                                    std::size_t num_samples) {
  const std::size_t expected = static_cast<std::size_t>(num_classes - 1) * num_samples;
  if (results.size() != expected)
    throw std::invalid_argument("targeted_success_rate: expected " + std::to_string(expected) + " results, got " +
                                std::to_string(results.size()));
  std::size_t successes = 0;
  for (const auto& r : results) {
    if (!r.target) throw std::invalid_argument("targeted_success_rate: result without a target");
    successes += r.success ? 1 : 0;
  }
  return 100.0 * static_cast<double>(successes) / static_cast<double>(expected);
}

inline double targeted_success_rate(const Classifier& clf, const Dataset& ds, AttackConfig cfg, int threads = 1) {
  cfg.mode = AttackMode::targeted;
  const auto results = attack_dataset(clf, ds, cfg, threads);
  return targeted_success_rate(results, ds.num_classes, ds.size());
}

namespace detail {

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage '") + stage + "' failed: " + e.what());
  }
}

}  // namespace detail

// Full pipeline for one summary row: base model (trained here unless
// `pretrained` is given), clean accuracy, universal attack, FGSM/BIM
// untargeted accuracies and targeted success rates, adversarial training,
// and the two attacks repeated against the defended model. Attack metrics
// are computed on the test split; the universal perturbation is computed on
// the train split.
inline ReportRow table1_row(const Dataset& train, const Dataset& test, const ClassifierConfig& model_cfg,
                            const TrainSchedule& base_schedule, const AttackConfig& attack_cfg,
                            const DefenseConfig& defense_cfg, const UniversalConfig& universal_cfg,
                            const Classifier* pretrained = nullptr, int threads = 1) {
  ReportRow row;
  row.dataset = test.name;

  const Classifier base = detail::run_stage("base model", [&] {
    return pretrained ? *pretrained : fit(init_classifier(model_cfg), train, base_schedule, threads).model;
  });

  row.original_accuracy = detail::run_stage("original accuracy", [&] { return accuracy(base, test, threads); });

  row.universal_attack_accuracy = detail::run_stage("universal attack", [&] {
    const auto up = compute_universal(base, train, universal_cfg, threads);
    return 100.0 * (1.0 - error_ratio(base, test, up.u, threads));
  });

  AttackConfig fgsm_cfg = attack_cfg;
  fgsm_cfg.method = AttackMethod::fgsm;
  AttackConfig bim_cfg = attack_cfg;
  bim_cfg.method = AttackMethod::bim;

  row.fgsm_attack_accuracy =
      detail::run_stage("fgsm attack", [&] { return attacked_accuracy(base, test, fgsm_cfg, threads); });
  row.bim_attack_accuracy =
      detail::run_stage("bim attack", [&] { return attacked_accuracy(base, test, bim_cfg, threads); });
  row.fgsm_targeted_success =
      detail::run_stage("fgsm targeted", [&] { return targeted_success_rate(base, test, fgsm_cfg, threads); });
  row.bim_targeted_success =
      detail::run_stage("bim targeted", [&] { return targeted_success_rate(base, test, bim_cfg, threads); });

  const Classifier defended = detail::run_stage("adversarial training", [&] {
    const Dataset adv =
        defense_cfg.precompute ? precompute_adversarials(base, train, defense_cfg, threads) : Dataset{};
    return adversarial_train(base, train, adv, defense_cfg, threads).model;
  });

  row.advtrained_fgsm_accuracy = detail::run_stage("defended fgsm attack",
                                                   [&] { return attacked_accuracy(defended, test, fgsm_cfg, threads); });
  row.advtrained_bim_accuracy = detail::run_stage("defended bim attack",
                                                  [&] { return attacked_accuracy(defended, test, bim_cfg, threads); });
  return row;
}

// One point per eps for both FGSM and BIM. The accuracy metric reports
// attacked accuracy; targeted_success reports the success rate over all
// (K-1)*M pairs. BIM uses alpha = eps/2 at each grid point.
inline std::vector<SweepPoint> epsilon_sweep(const Classifier& clf, const Dataset& ds,
                                             const std::vector<double>& eps_grid, SweepMetric metric,
                                             int bim_steps = 10, int threads = 1) {
  if (eps_grid.empty()) throw std::invalid_argument("epsilon_sweep: empty grid");
  double prev = -1.0;
  for (double e : eps_grid) {
    if (e < 0.0) throw std::invalid_argument("epsilon_sweep: eps must be >= 0");
    if (e <= prev) throw std::invalid_argument("epsilon_sweep: grid must be strictly ascending");
    prev = e;
  }

  std::vector<SweepPoint> points;
  points.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    AttackConfig fgsm_cfg;
    fgsm_cfg.method = AttackMethod::fgsm;
    fgsm_cfg.eps_max = eps;
    AttackConfig bim_cfg;
    bim_cfg.method = AttackMethod::bim;
    bim_cfg.eps_max = eps;
    bim_cfg.steps = bim_steps;
    bim_cfg.alpha = eps > 0.0 ? eps / 2.0 : 1.0;  // alpha unused at eps 0 beyond validation

    SweepPoint p;
    p.eps = eps;
    p.metric = metric;
    if (metric == SweepMetric::accuracy) {
      p.fgsm_value = attacked_accuracy(clf, ds, fgsm_cfg, threads);
      p.bim_value = attacked_accuracy(clf, ds, bim_cfg, threads);
    } else {
      p.fgsm_value = targeted_success_rate(clf, ds, fgsm_cfg, threads);
      p.bim_value = targeted_success_rate(clf, ds, bim_cfg, threads);
    }
    points.push_back(p);
  }
  return points;
}

// Universal success rate on the test split, for perturbations computed on
// growing fractions of the training split. `seed` drives the subsampling.
inline std::vector<GeneralizationPoint> generalization_curve(const Classifier& clf, const Dataset& train,
                                                             const Dataset& test,
                                                             const std::vector<double>& fractions,
                                                             const UniversalConfig& universal_cfg,
                                                             std::uint64_t seed, int threads = 1) {
  if (fractions.empty()) throw std::invalid_argument("generalization_curve: no fractions");
  double prev = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("generalization_curve: fractions must be in (0, 1]");
    if (f <= prev) throw std::invalid_argument("generalization_curve: fractions must be strictly ascending");
    prev = f;
  }

  std::vector<GeneralizationPoint> curve;
  curve.reserve(fractions.size());
  for (double f : fractions) {
    const Dataset sub = subsample(train, f, seed);
    const auto up = compute_universal(clf, sub, universal_cfg, threads);
    curve.push_back({f, 100.0 * error_ratio(clf, test, up.u, threads)});
  }
  return curve;
}

// FGSM and BIM accuracy for both models at every eps in the grid; an eps of
// 0 yields the clean accuracies. Rows are ordered eps-major, then model
// (original, defended), then method (fgsm, bim).
inline std::vector<DefenseCurveRow> defense_curve(const Classifier& original, const Classifier& defended,
                                                  const Dataset& test, const std::vector<double>& eps_grid,
                                                  int bim_steps = 10, int threads = 1) {
  if (eps_grid.empty()) throw std::invalid_argument("defense_curve: empty grid");
  std::vector<DefenseCurveRow> rows;
  rows.reserve(eps_grid.size() * 4);
  for (double eps : eps_grid) {
    for (const auto& [name, model] : {std::pair<const char*, const Classifier*>{"original", &original},
                                      std::pair<const char*, const Classifier*>{"defended", &defended}}) {
      AttackConfig fgsm_cfg;
      fgsm_cfg.method = AttackMethod::fgsm;
      fgsm_cfg.eps_max = eps;
      AttackConfig bim_cfg;
      bim_cfg.method = AttackMethod::bim;
      bim_cfg.eps_max = eps;
      bim_cfg.steps = bim_steps;
      bim_cfg.alpha = eps > 0.0 ? eps / 2.0 : 1.0;
      rows.push_back({eps, name, "fgsm", attacked_accuracy(*model, test, fgsm_cfg, threads)});
      rows.push_back({eps, name, "bim", attacked_accuracy(*model, test, bim_cfg, threads)});
    }
  }
  return rows;
}

}  // namespace tsadv
