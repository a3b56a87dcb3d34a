#pragma once

#include <cstdint>
#include <vector>

#include "probout/dataset.hpp"
#include "probout/network.hpp"

namespace probout {

enum class InferenceMode {
  SampleAverage,     // average E sampled softmax outputs
  MaxAtTest,         // probout units replaced by max
  ProbWeightAtTest,  // probout units replaced by their expected activation
};

struct AveragingConfig {
  int evaluations = 50;
  std::uint64_t seed = 0;
  InferenceMode mode = InferenceMode::SampleAverage;

  void validate() const;
};

template <typename T>
struct Prediction {
  BasicTensor<T> probabilities;
  std::size_t label = 0;
};

/// Lowest index among the maxima.
template <typename T>
std::size_t argmax(const BasicTensor<T>& v);

/// Averages the softmax outputs of E sampled instantiations. Evaluation e of
/// example i draws from RngStream(cfg.seed).fork(i).fork(e), so results do not
/// depend on evaluation order or thread count. `params` must already be
/// weight-halved. Deterministic modes delegate to predict_deterministic.
template <typename T>
Prediction<T> predict(const ModelConfig& config, const Parameters<T>& params, const BasicTensor<T>& x,
                      const AveragingConfig& cfg, std::uint64_t example_index = 0);

template <typename T>
Prediction<T> predict_deterministic(const ModelConfig& config, const Parameters<T>& params,
                                    const BasicTensor<T>& x, InferenceMode mode);

/// Percentage of misclassified examples.
double classification_error(const ModelConfig& config, const Parameters<float>& params,
                            const Dataset& data, const AveragingConfig& cfg, unsigned threads = 1);

struct AveragingRow {
  int evaluations = 0;
  double mean_error = 0.0;
  double std_error = 0.0;  // sample standard deviation over repeats
};

/// For each E, `repeats` error measurements with seeds derive_seed(seed, r).
std::vector<AveragingRow> averaging_curve(const ModelConfig& config, const Parameters<float>& params,
                                          const Dataset& data, const std::vector<int>& evaluation_counts,
                                          int repeats, std::uint64_t seed, unsigned threads = 1);

ForwardMode forward_mode(InferenceMode mode);

}  // namespace probout
