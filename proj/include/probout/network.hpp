#pragma once

#include <cstddef>
#include <vector>

#include "probout/layers.hpp"
#include "probout/model_config.hpp"
#include "probout/rng.hpp"
#include "probout/tensor.hpp"

namespace probout {

template <typename T>
struct LayerParams {
  BasicTensor<T> weight;  // conv [units*k, cin, rf, rf]; fc [units*k, d]; softmax [C, d]
  BasicTensor<T> bias;
  bool operator==(const LayerParams&) const = default;
};

template <typename T>
struct Parameters {
  std::vector<LayerParams<T>> layers;

  std::size_t parameter_count() const;
  /// Flat view across all layers, weights before biases within a layer.
  T& at(std::size_t flat);
  const T& at(std::size_t flat) const;

  Parameters zeros_like() const;

  template <typename U>
  Parameters<U> cast() const {
    Parameters<U> out;
    for (const auto& l : layers) out.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    return out;
  }

  bool operator==(const Parameters&) const = default;
};

/// Every stochastic or argmax choice made by one forward pass.
struct LayerTrace {
  IndexTensor selections;   // per unit and location
  IndexTensor pool_argmax;  // empty when the layer has no spatial pooling
};

struct SelectionTrace {
  std::vector<LayerTrace> layers;  // one per subspace layer
};

struct ForwardOptions {
  /// Retain every layer's input/output; required by model_backward and probes.
  bool keep_activations = false;
  /// Reuse these choices instead of sampling (frozen-trace evaluation).
  const SelectionTrace* replay = nullptr;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> output;  // class probabilities
  BasicTensor<T> logits;
  SelectionTrace trace;
  /// activations[0] is the input; activations[i+1] is the output of layer i
  /// after spatial pooling. Empty unless keep_activations was set.
  std::vector<BasicTensor<T>> activations;
};

/// Zero-mean uniform weights with half-width sqrt(6 / (fan_in + fan_out));
/// zero biases.
template <typename T>
Parameters<T> init_parameters(const ModelConfig& config, RngStream& rng);

/// Throws DimensionError unless the parameter shapes match the config.
template <typename T>
void check_parameters(const ModelConfig& config, const Parameters<T>& params);

template <typename T>
ForwardResult<T> model_forward(const ModelConfig& config, const Parameters<T>& params,
                               const BasicTensor<T>& x, ForwardMode mode, RngStream& rng,
                               const ForwardOptions& options = {});

/// Gradient of the loss with respect to every parameter, holding the
/// recorded selections fixed. `grad_logits` is dL/d(softmax input).
template <typename T>
Parameters<T> model_backward(const ModelConfig& config, const Parameters<T>& params,
                             const ForwardResult<T>& forward, const BasicTensor<T>& grad_logits);

/// Same as model_backward but adds into `grads`.
template <typename T>
void model_backward_accumulate(const ModelConfig& config, const Parameters<T>& params,
                               const ForwardResult<T>& forward, const BasicTensor<T>& grad_logits,
                               Parameters<T>& grads);

/// Multiplies by 0.5 the weights (not biases) of every layer whose input was
/// subject to dropout during training. Not idempotent: apply exactly once.
template <typename T>
Parameters<T> halve_weights(const ModelConfig& config, const Parameters<T>& params);

}  // namespace probout
