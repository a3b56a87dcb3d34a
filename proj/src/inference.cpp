#include "probout/inference.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "probout/parallel.hpp"

namespace probout {

void AveragingConfig::validate() const {
  if (evaluations < 1) throw std::invalid_argument("number of model evaluations must be >= 1");
}

ForwardMode forward_mode(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::SampleAverage: return ForwardMode::InferSample;
    case InferenceMode::MaxAtTest: return ForwardMode::InferMax;
    case InferenceMode::ProbWeightAtTest: return ForwardMode::InferProbWeight;
  }
  return ForwardMode::InferMax;
}

template <typename T>
std::size_t argmax(const BasicTensor<T>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

namespace {

bool has_stochastic_layer(const ModelConfig& config) {
  for (const auto& layer : config.layers) {
    if (layer.is_subspace() && layer.unit_type == UnitType::Probout) return true;
  }
  return false;
}

}  // namespace

template <typename T>
Prediction<T> predict_deterministic(const ModelConfig& config, const Parameters<T>& params,
                                    const BasicTensor<T>& x, InferenceMode mode) {
  if (mode == InferenceMode::SampleAverage) {
    throw ModeError("predict_deterministic: sample averaging is not deterministic");
  }
  RngStream unused(0);
  auto fwd = model_forward(config, params, x, forward_mode(mode), unused);
  const std::size_t label = argmax(fwd.output);
  return {std::move(fwd.output), label};
}

template <typename T>
Prediction<T> predict(const ModelConfig& config, const Parameters<T>& params, const BasicTensor<T>& x,
                      const AveragingConfig& cfg, std::uint64_t example_index) {
  cfg.validate();
  if (cfg.mode != InferenceMode::SampleAverage) return predict_deterministic(config, params, x, cfg.mode);
  const int evaluations = has_stochastic_layer(config) ? cfg.evaluations : 1;
  const RngStream example_stream = RngStream(cfg.seed).fork(example_index);
  std::vector<double> sum(config.classes(), 0.0);
  for (int e = 0; e < evaluations; ++e) {
    RngStream rng = example_stream.fork(static_cast<std::uint64_t>(e));
    const auto fwd = model_forward(config, params, x, ForwardMode::InferSample, rng);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += static_cast<double>(fwd.output[c]);
  }
  BasicTensor<T> avg({sum.size()});
  for (std::size_t c = 0; c < sum.size(); ++c) avg[c] = static_cast<T>(sum[c] / evaluations);
  const std::size_t label = argmax(avg);
  return {std::move(avg), label};
}

double classification_error(const ModelConfig& config, const Parameters<float>& params,
                            const Dataset& data, const AveragingConfig& cfg, unsigned threads) {
  cfg.validate();
  if (data.size() == 0) throw DatasetError("classification_error: empty dataset");
  std::vector<unsigned char> wrong(data.size(), 0);
  parallel_for(data.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = predict(config, params, data.example(i), cfg, i);
      wrong[i] = static_cast<int>(p.label) != data.labels[i];
    }
  });
  const auto errors = std::accumulate(wrong.begin(), wrong.end(), std::size_t{0});
  return 100.0 * static_cast<double>(errors) / static_cast<double>(data.size());
}

std::vector<AveragingRow> averaging_curve(const ModelConfig& config, const Parameters<float>& params,
                                          const Dataset& data, const std::vector<int>& evaluation_counts,
                                          int repeats, std::uint64_t seed, unsigned threads) {
  if (evaluation_counts.empty()) throw std::invalid_argument("averaging_curve: empty list of E values");
  if (repeats < 1) throw std::invalid_argument("averaging_curve: repeats must be >= 1");
  std::vector<AveragingRow> rows;
  for (int e : evaluation_counts) {
    std::vector<double> errors;
    for (int r = 0; r < repeats; ++r) {
      const AveragingConfig cfg{e, derive_seed(seed, static_cast<std::uint64_t>(r)), InferenceMode::SampleAverage};
      errors.push_back(classification_error(config, params, data, cfg, threads));
    }
    const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / repeats;
    double var = 0.0;
    for (double x : errors) var += (x - mean) * (x - mean);
    const double sd = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
    rows.push_back({e, mean, sd});
  }
  return rows;
}

#define PROBOUT_INSTANTIATE_INFERENCE(T)                                                           \
  template std::size_t argmax(const BasicTensor<T>&);                                               \
  template Prediction<T> predict(const ModelConfig&, const Parameters<T>&, const BasicTensor<T>&,  \
                                 const AveragingConfig&, std::uint64_t);                            \
  template Prediction<T> predict_deterministic(const ModelConfig&, const Parameters<T>&,           \
                                               const BasicTensor<T>&, InferenceMode);

PROBOUT_INSTANTIATE_INFERENCE(float)
PROBOUT_INSTANTIATE_INFERENCE(double)

}  // namespace probout
