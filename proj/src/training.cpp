#include "probout/training.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <stdexcept>

#include "probout/inference.hpp"
#include "probout/parallel.hpp"
#include "probout/preprocess.hpp"

namespace probout {

void SgdConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("learning-rate decay must be positive");
  if (epochs_max < 0) throw std::invalid_argument("epochs must be non-negative");
  if (patience < 0) throw std::invalid_argument("patience must be non-negative");
  if (valid_evaluations < 1) throw std::invalid_argument("validation evaluations must be >= 1");
}

double LambdaSchedule::final_value(std::size_t layer) const {
  const double start = initial.at(layer);
  return annealed(layer) ? std::max(start - kAnnealDrop, kLambdaFloor) : start;
}

LambdaSchedule schedule_from_config(const ModelConfig& config, int epochs_total) {
  return LambdaSchedule{layer_lambdas(config), epochs_total};
}

std::vector<double> lambda_at(const LambdaSchedule& schedule, int epoch) {
  if (epoch < 0 || epoch > schedule.epochs_total) {
    throw std::out_of_range(fmt::format("lambda_at: epoch {} outside [0, {}]", epoch, schedule.epochs_total));
  }
  std::vector<double> out(schedule.initial.size());
  for (std::size_t l = 0; l < out.size(); ++l) {
    const double start = schedule.initial[l];
    if (!schedule.annealed(l) || epoch == 0) {
      out[l] = start;
    } else if (epoch == schedule.epochs_total) {
      out[l] = std::max(start - kAnnealDrop, kLambdaFloor);
    } else {
      const double fraction = static_cast<double>(epoch) / schedule.epochs_total;
      out[l] = std::max(start - kAnnealDrop * fraction, kLambdaFloor);
    }
  }
  return out;
}

template <typename T>
void sgd_step(Parameters<T>& params, const Parameters<T>& grads, Parameters<T>& velocity,
              double learning_rate, double momentum) {
  if (params.layers.size() != grads.layers.size() || params.layers.size() != velocity.layers.size()) {
    throw DimensionError("sgd_step: parameter/gradient/velocity layer counts differ");
  }
  const T lr = static_cast<T>(learning_rate);
  const T mu = static_cast<T>(momentum);
  auto update = [&](BasicTensor<T>& p, const BasicTensor<T>& g, BasicTensor<T>& v) {
    if (p.shape() != g.shape() || p.shape() != v.shape()) throw DimensionError("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] - lr * g[i];
      p[i] = p[i] + v[i];
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight, velocity.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias, velocity.layers[l].bias);
  }
}

template void sgd_step(Parameters<float>&, const Parameters<float>&, Parameters<float>&, double, double);
template void sgd_step(Parameters<double>&, const Parameters<double>&, Parameters<double>&, double, double);

namespace {

constexpr std::uint64_t kTrainStream = 0x7261696e;
constexpr std::uint64_t kValidLabel = 0x76616c69;

bool finite_params(const Parameters<float>& p) {
  for (const auto& l : p.layers) {
    if (!all_finite(l.weight) || !all_finite(l.bias)) return false;
  }
  return true;
}

void add_into(Parameters<float>& dst, const Parameters<float>& src, float scale) {
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    auto& dw = dst.layers[l].weight;
    auto& db = dst.layers[l].bias;
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += scale * src.layers[l].weight[i];
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += scale * src.layers[l].bias[i];
  }
}

/// One pass over `data`; returns the mean training loss.
double run_epoch(const ModelConfig& config, Parameters<float>& params, Parameters<float>& velocity,
                 const Dataset& data, const SgdConfig& sgd, int epoch) {
  const RngStream root(sgd.seed, kTrainStream);
  const auto e = static_cast<std::uint64_t>(epoch);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle = root.fork(2 * e);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
  const RngStream example_root = root.fork(2 * e + 1);

  const double lr = sgd.learning_rate * std::pow(sgd.lr_decay, epoch);
  const unsigned threads = std::max(1u, sgd.threads);
  std::vector<Parameters<float>> worker_grads(threads, params.zeros_like());
  std::vector<double> worker_loss(threads);
  double total_loss = 0.0;

  for (std::size_t start = 0; start < order.size(); start += sgd.batch_size) {
    const std::size_t stop = std::min(order.size(), start + sgd.batch_size);
    for (auto& g : worker_grads) g = params.zeros_like();
    std::fill(worker_loss.begin(), worker_loss.end(), 0.0);

    try {
      parallel_for(stop - start, threads, [&](std::size_t begin, std::size_t end, unsigned worker) {
        for (std::size_t pos = start + begin; pos < start + end; ++pos) {
          const std::size_t idx = order[pos];
          RngStream rng = example_root.fork(pos);
          Tensor x = data.example(idx);
          if (sgd.augment_shift > 0 || sgd.augment_flip) {
            x = augment_example(x, rng, sgd.augment_shift, sgd.augment_flip);
          }
          const auto fwd = model_forward(config, params, x, ForwardMode::Train, rng, {.keep_activations = true});
          const auto label = static_cast<std::size_t>(data.labels[idx]);
          worker_loss[worker] += cross_entropy(fwd.output, label, sgd.loss);
          model_backward_accumulate(config, params, fwd, loss_gradient_logits(fwd.output, label, sgd.loss),
                                    worker_grads[worker]);
        }
      });
    } catch (const ProbabilityError& e) {
      // Finite but huge weights overflow inside the forward pass.
      throw DivergenceError(fmt::format("training diverged in epoch {} ({})", epoch + 1, e.what()), epoch + 1);
    }

    Parameters<float> grads = params.zeros_like();
    const float scale = 1.0f / static_cast<float>(stop - start);
    for (unsigned w = 0; w < threads; ++w) {
      add_into(grads, worker_grads[w], scale);
      total_loss += worker_loss[w];
    }
    sgd_step(params, grads, velocity, lr, sgd.momentum);
    // Checked per batch: non-finite weights would otherwise surface as a
    // probability error in the next forward pass.
    if (!finite_params(params)) {
      throw DivergenceError(fmt::format("training diverged in epoch {} (non-finite parameters)", epoch + 1),
                            epoch + 1);
    }
  }

  const double mean_loss = total_loss / static_cast<double>(data.size());
  if (!std::isfinite(mean_loss)) {
    throw DivergenceError(fmt::format("training diverged in epoch {} (mean loss {})", epoch + 1, mean_loss),
                          epoch + 1);
  }
  return mean_loss;
}

void check_schedule(const ModelConfig& config, const LambdaSchedule& schedule) {
  if (schedule.initial.size() != config.subspace_layer_count()) {
    throw std::invalid_argument("lambda schedule needs one value per subspace layer");
  }
  if (schedule.epochs_total < 0) throw std::invalid_argument("lambda schedule length must be non-negative");
}

ModelConfig config_at_epoch(ModelConfig config, const LambdaSchedule& schedule, int epoch) {
  set_layer_lambdas(config, lambda_at(schedule, std::min(epoch, schedule.epochs_total)));
  return config;
}

}  // namespace

TrainResult train(const ModelConfig& config, Parameters<float> params, const Dataset& train_set,
                  const Dataset& valid_set, const SgdConfig& sgd, const LambdaSchedule& schedule) {
  sgd.validate();
  config.validate();
  check_parameters(config, params);
  check_schedule(config, schedule);
  if (train_set.size() == 0) throw DatasetError("train: empty training set");
  if (valid_set.size() == 0) throw DatasetError("train: empty validation set");

  TrainResult result;
  result.config = config_at_epoch(config, schedule, 0);
  result.params = params;
  result.best_valid_error = 101.0;
  Parameters<float> velocity = params.zeros_like();
  const AveragingConfig valid_cfg{sgd.valid_evaluations, derive_seed(sgd.seed, kValidLabel),
                                  InferenceMode::SampleAverage};
  int since_best = 0;

  for (int epoch = 0; epoch < sgd.epochs_max; ++epoch) {
    const ModelConfig epoch_config = config_at_epoch(config, schedule, epoch);
    const double loss = run_epoch(epoch_config, params, velocity, train_set, sgd, epoch);
    const double valid_error =
        classification_error(epoch_config, halve_weights(epoch_config, params), valid_set, valid_cfg, sgd.threads);
    result.history.push_back({epoch + 1, layer_lambdas(epoch_config), loss, valid_error});

    if (valid_error < result.best_valid_error) {
      result.best_valid_error = valid_error;
      result.best_epoch = epoch + 1;
      result.params = params;
      result.config = epoch_config;
      since_best = 0;
    } else if (++since_best >= std::max(sgd.patience, 1)) {
      break;
    }
  }
  return result;
}

TrainResult retrain_full(const ModelConfig& config, Parameters<float> params, const Dataset& full_set,
                         int epochs, const SgdConfig& sgd, const LambdaSchedule& schedule) {
  sgd.validate();
  config.validate();
  check_parameters(config, params);
  check_schedule(config, schedule);
  if (epochs < 0) throw std::invalid_argument("retrain_full: epochs must be non-negative");
  if (full_set.size() == 0) throw DatasetError("retrain_full: empty training set");

  TrainResult result;
  Parameters<float> velocity = params.zeros_like();
  ModelConfig epoch_config = config_at_epoch(config, schedule, 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    epoch_config = config_at_epoch(config, schedule, epoch);
    const double loss = run_epoch(epoch_config, params, velocity, full_set, sgd, epoch);
    result.history.push_back({epoch + 1, layer_lambdas(epoch_config), loss, std::nullopt});
  }
  result.config = epoch_config;
  result.params = std::move(params);
  result.best_epoch = epochs;
  result.best_valid_error = std::nan("");
  return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string out = "epoch";
  const std::size_t layers = history.empty() ? 0 : history.front().lambdas.size();
  for (std::size_t l = 0; l < layers; ++l) out += fmt::format(",lambda{}", l + 1);
  out += ",train_loss,valid_error\n";
  for (const auto& row : history) {
    out += fmt::format("{}", row.epoch);
    for (double lam : row.lambdas) out += fmt::format(",{:.6f}", lam);
    out += fmt::format(",{:.6f},", row.train_loss);
    if (row.valid_error) out += fmt::format("{:.4f}", *row.valid_error);
    out += "\n";
  }
  return out;
}

}  // namespace probout
