#pragma once

// Adversarial training. By default adversarial counterparts are computed
// once from the frozen starting model and each mini-batch is the
// concatenation of a clean batch with its precomputed counterparts. A
// regenerate mode (precompute = false) instead recomputes the adversarials
// per batch from the current model.

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsadv/attack.hpp"
#include "tsadv/dataset.hpp"
#include "tsadv/net.hpp"
#include "tsadv/train.hpp"

namespace tsadv {

struct DefenseConfig {
  AttackConfig attack;      // untargeted FGSM at eps_max by default
  int adv_per_clean = 1;
  TrainSchedule schedule{.max_epochs = 1500,
                         .batch_size = 16,
                         .initial_lr = 0.0005,
                         .min_lr = 0.0001,
                         .plateau_patience = 50,
                         .lr_factor = 0.5,
                         .optimizer = Optimizer::adam,
                         .seed = 0};
  bool precompute = true;
};

inline void validate_defense_config(const DefenseConfig& cfg) {
  if (cfg.adv_per_clean < 1) throw std::invalid_argument("DefenseConfig: adv_per_clean must be >= 1");
  validate_schedule(cfg.schedule);
}

namespace detail {

// Variant k of adv_per_clean uses eps scaled by k / adv_per_clean.
inline AttackConfig variant_config(const DefenseConfig& cfg, int k) {
  AttackConfig a = cfg.attack;
  a.mode = AttackMode::untargeted;
  a.eps_max = cfg.attack.eps_max * static_cast<double>(k) / static_cast<double>(cfg.adv_per_clean);
  return a;
}

inline LabeledSeries make_adversarial(const Classifier& clf, const LabeledSeries& sample, const AttackConfig& a) {
  const auto r = a.method == AttackMethod::fgsm ? fgsm(clf, sample, a.eps_max, AttackMode::untargeted)
                                                : bim(clf, sample, a);
  return {r.adversarial, sample.label};
}

}  // namespace detail

// One adversarial counterpart per (sample, variant), labeled with the true
// label, ordered sample-major: index i * adv_per_clean + (k - 1).
inline Dataset precompute_adversarials(const Classifier& clf, const Dataset& train, const DefenseConfig& cfg,
                                       int threads = 1) {
  validate_defense_config(cfg);
  if (train.empty()) throw std::invalid_argument("precompute_adversarials: empty dataset");

  Dataset adv;
  adv.name = train.name + "_adv";
  adv.num_classes = train.num_classes;
  adv.series_length = train.series_length;
  adv.split = train.split;
  adv.samples.resize(train.size() * static_cast<std::size_t>(cfg.adv_per_clean));

  parallel_for(adv.samples.size(), threads, [&](std::size_t j) {
    const std::size_t i = j / cfg.adv_per_clean;
    const int k = static_cast<int>(j % cfg.adv_per_clean) + 1;
    adv.samples[j] = detail::make_adversarial(clf, train.samples[i], detail::variant_config(cfg, k));
  });
  return adv;
}

using BatchObserver = std::function<void(int epoch, std::size_t clean_count, std::size_t adv_count)>;

// Fine-tunes the classifier on clean + adversarial batches. `adv` must be
// aligned with `train` as produced by precompute_adversarials; it is ignored
// (and may be empty) when cfg.precompute is false.
inline FitResult adversarial_train(const Classifier& clf, const Dataset& train, const Dataset& adv,
                                   const DefenseConfig& cfg, int threads = 1,
                                   const BatchObserver& observer = {}) {
  validate_defense_config(cfg);
  if (train.empty()) throw std::invalid_argument("adversarial_train: empty training set");
  const std::size_t a = static_cast<std::size_t>(cfg.adv_per_clean);

  if (cfg.precompute) {
    if (adv.size() != train.size() * a)
      throw std::invalid_argument("adversarial_train: adversarial set is misaligned (expected " +
                                  std::to_string(train.size() * a) + " samples, got " + std::to_string(adv.size()) +
                                  ")");
    if (adv.series_length != train.series_length)
      throw std::invalid_argument("adversarial_train: adversarial series length mismatch");
    for (std::size_t i = 0; i < train.size(); ++i)
      for (std::size_t k = 0; k < a; ++k)
        if (adv.samples[i * a + k].label != train.samples[i].label)
          throw std::invalid_argument("adversarial_train: adversarial set is misaligned at sample " +
                                      std::to_string(i));
  }

  const auto& schedule = cfg.schedule;
  Classifier model = clf;
  FitResult result;
  result.history.reserve(schedule.max_epochs);

  Rng shuffle_rng(derive_seed(schedule.seed, 0x61647673ull /* "advs" */));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  detail::AdamState adam;
  detail::PlateauTracker plateau;
  double lr = schedule.initial_lr;

  // Regenerated adversarials live here while their batch is in flight.
  std::vector<LabeledSeries> scratch;

  for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t member_count = 0;

    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      const std::size_t clean_count = end - start;

      std::vector<SampleRef> batch;
      batch.reserve(clean_count * (1 + a));
      for (std::size_t i = start; i < end; ++i)
        batch.push_back({&train.samples[order[i]].values, train.samples[order[i]].label});

      if (cfg.precompute) {
        for (std::size_t i = start; i < end; ++i)
          for (std::size_t k = 0; k < a; ++k) {
            const auto& s = adv.samples[order[i] * a + k];
            batch.push_back({&s.values, s.label});
          }
      } else {
        scratch.clear();
        scratch.reserve(clean_count * a);
        for (std::size_t i = start; i < end; ++i)
          for (std::size_t k = 1; k <= a; ++k)
            scratch.push_back(detail::make_adversarial(model, train.samples[order[i]],
                                                       detail::variant_config(cfg, static_cast<int>(k))));
        for (const auto& s : scratch) batch.push_back({&s.values, s.label});
      }

      if (observer) observer(epoch, clean_count, batch.size() - clean_count);

      double batch_loss = 0.0;
      const auto grad = grad_params(model, batch, threads, &batch_loss);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      member_count += batch.size();

      auto& p = model.mutable_parameters();
      if (schedule.optimizer == Optimizer::adam) {
        adam.step(p, grad, lr);
      } else {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
      }
    }

    const double epoch_loss = loss_sum / static_cast<double>(member_count);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("adversarial_train: training diverged (non-finite loss) at epoch " +
                               std::to_string(epoch));
    result.history.push_back({epoch_loss, lr});
    if (plateau.update(epoch_loss, schedule.plateau_patience)) lr = std::max(lr * schedule.lr_factor, schedule.min_lr);
  }

  result.model = std::move(model);
  return result;
}

}  // namespace tsadv
