#pragma once

// Mini-batch training with a plateau learning-rate schedule: the rate is
// multiplied by lr_factor whenever the best epoch-mean training loss has not
// improved (tolerance 1e-6) for plateau_patience consecutive epochs, floored
// at min_lr.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tsadv/dataset.hpp"
#include "tsadv/net.hpp"
#include "tsadv/rng.hpp"

namespace tsadv {

enum class Optimizer { adam, sgd };

struct TrainSchedule {
  int max_epochs = 100;
  int batch_size = 16;
  double initial_lr = 0.001;
  double min_lr = 0.0001;
  int plateau_patience = 50;
  double lr_factor = 0.5;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 0;
};

inline void validate_schedule(const TrainSchedule& s) {
  if (s.max_epochs < 0) throw std::invalid_argument("TrainSchedule: max_epochs must be >= 0");
  if (s.batch_size < 1) throw std::invalid_argument("TrainSchedule: batch_size must be positive");
  if (s.min_lr > s.initial_lr) throw std::invalid_argument("TrainSchedule: min_lr must be <= initial_lr");
  if (s.plateau_patience < 1) throw std::invalid_argument("TrainSchedule: plateau_patience must be >= 1");
  if (!(s.lr_factor > 0.0 && s.lr_factor < 1.0))
    throw std::invalid_argument("TrainSchedule: lr_factor must be in (0, 1)");
}

struct EpochStats {
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct FitResult {
  Classifier model;
  std::vector<EpochStats> history;
};

namespace detail {

constexpr double kPlateauTol = 1e-6;

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void step(std::vector<double>& p, const std::vector<double>& g, double lr) {
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

struct PlateauTracker {
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;

  // Returns true when the rate should be reduced this epoch.
  bool update(double epoch_loss, int patience) {
    if (epoch_loss < best - kPlateauTol) {
      best = epoch_loss;
      stall = 0;
      return false;
    }
    if (++stall >= patience) {
      stall = 0;
      return true;
    }
    return false;
  }
};

// One optimization epoch over `batches` (each batch a list of SampleRefs).
// Returns the sample-weighted mean loss.
inline double run_epoch(Classifier& clf, const std::vector<std::vector<SampleRef>>& batches, AdamState& adam,
                        Optimizer opt, double lr, int threads) {
  double loss_sum = 0.0;
  std::size_t count = 0;
  for (const auto& batch : batches) {
    double batch_loss = 0.0;
    const auto grad = grad_params(clf, batch, threads, &batch_loss);
    loss_sum += batch_loss * static_cast<double>(batch.size());
    count += batch.size();
    auto& p = clf.mutable_parameters();
    if (opt == Optimizer::adam) {
      adam.step(p, grad, lr);
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
    }
  }
  return loss_sum / static_cast<double>(count);
}

}  // namespace detail

// Trains a copy of the classifier; per-epoch shuffling is deterministic in
// schedule.seed. Throws if the training loss diverges to NaN/Inf.
inline FitResult fit(Classifier clf, const Dataset& train, const TrainSchedule& schedule, int threads = 1) {
  validate_schedule(schedule);
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  if (train.series_length != clf.config().series_length)
    throw std::invalid_argument("fit: dataset series length does not match model config");
  if (train.num_classes > clf.config().num_classes)
    throw std::invalid_argument("fit: dataset has more classes than the model");

  FitResult result;
  result.history.reserve(schedule.max_epochs);

  Rng shuffle_rng(derive_seed(schedule.seed, 0x73687566ull /* "shuf" */));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  detail::AdamState adam;
  detail::PlateauTracker plateau;
  double lr = schedule.initial_lr;

  for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::vector<std::vector<SampleRef>> batches;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      const std::size_t end = std::min(order.size(), start + schedule.batch_size);
      std::vector<SampleRef> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back({&train.samples[order[i]].values, train.samples[order[i]].label});
      batches.push_back(std::move(batch));
    }

    const double epoch_loss = detail::run_epoch(clf, batches, adam, schedule.optimizer, lr, threads);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("fit: training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    result.history.push_back({epoch_loss, lr});

    if (plateau.update(epoch_loss, schedule.plateau_patience)) lr = std::max(lr * schedule.lr_factor, schedule.min_lr);
  }

  result.model = std::move(clf);
  return result;
}

}  // namespace tsadv
