#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probout/dataset.hpp"
#include "probout/loss.hpp"
#include "probout/network.hpp"

namespace probout {

struct SgdConfig {
  std::size_t batch_size = 100;
  double learning_rate = 0.05;
  double lr_decay = 0.995;  // multiplied in once per epoch
  double momentum = 0.9;
  int epochs_max = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::BinarySum;
  int valid_evaluations = 10;
  std::size_t augment_shift = 0;
  bool augment_flip = false;
  unsigned threads = 1;

  void validate() const;
};

inline constexpr double kAnnealDrop = 0.9;
inline constexpr double kAnnealThreshold = 0.5;
inline constexpr double kLambdaFloor = 0.05;

/// Per-layer inverse temperatures. A layer whose initial value exceeds 0.5 is
/// annealed linearly to (initial - 0.9) over epochs_total epochs, never going
/// below 0.05; other layers stay constant.
struct LambdaSchedule {
  std::vector<double> initial;
  int epochs_total = 100;

  bool annealed(std::size_t layer) const { return initial.at(layer) > kAnnealThreshold; }
  double final_value(std::size_t layer) const;
};

LambdaSchedule schedule_from_config(const ModelConfig& config, int epochs_total);

/// Throws std::out_of_range unless 0 <= epoch <= epochs_total.
std::vector<double> lambda_at(const LambdaSchedule& schedule, int epoch);

/// velocity <- momentum * velocity - lr * grad; params <- params + velocity.
template <typename T>
void sgd_step(Parameters<T>& params, const Parameters<T>& grads, Parameters<T>& velocity,
              double learning_rate, double momentum);

struct HistoryRow {
  int epoch = 0;  // 1-based
  std::vector<double> lambdas;
  double train_loss = 0.0;
  std::optional<double> valid_error;  // percent; absent when there is no validation set
};

struct TrainResult {
  ModelConfig config;  // carries the lambdas of the returned epoch
  Parameters<float> params;
  std::vector<HistoryRow> history;
  int best_epoch = 0;  // epochs needed to reach the returned parameters
  double best_valid_error = 0.0;
};

/// Minibatch SGD with dropout-integrated sampling and per-epoch lambda
/// annealing. Stops once `patience` consecutive epochs fail to improve the
/// validation error (patience 0 stops at the first such epoch) and returns
/// the parameters of the best epoch.
TrainResult train(const ModelConfig& config, Parameters<float> params, const Dataset& train_set,
                  const Dataset& valid_set, const SgdConfig& sgd, const LambdaSchedule& schedule);

/// Trains for exactly `epochs` epochs on the full set with no early stopping.
TrainResult retrain_full(const ModelConfig& config, Parameters<float> params, const Dataset& full_set,
                         int epochs, const SgdConfig& sgd, const LambdaSchedule& schedule);

/// CSV with header: epoch,lambda1..lambdaN,train_loss,valid_error
std::string history_csv(const std::vector<HistoryRow>& history);

}  // namespace probout
