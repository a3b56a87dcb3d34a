#include "probout/network.hpp"

#include <cmath>
#include <string>

namespace probout {

template <typename T>
std::size_t Parameters<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
T& Parameters<T>::at(std::size_t flat) {
  for (auto& l : layers) {
    if (flat < l.weight.size()) return l.weight[flat];
    flat -= l.weight.size();
    if (flat < l.bias.size()) return l.bias[flat];
    flat -= l.bias.size();
  }
  throw std::out_of_range("parameter index out of range");
}

template <typename T>
const T& Parameters<T>::at(std::size_t flat) const {
  return const_cast<Parameters*>(this)->at(flat);
}

template <typename T>
Parameters<T> Parameters<T>::zeros_like() const {
  Parameters out;
  for (const auto& l : layers) out.layers.push_back({BasicTensor<T>(l.weight.shape()), BasicTensor<T>(l.bias.shape())});
  return out;
}

namespace {

Shape weight_shape(const LayerSpec& spec, const LayerGeometry& g) {
  switch (spec.kind) {
    case LayerKind::ConvSubspace:
      return {spec.units * spec.k, g.input[0], spec.receptive_field, spec.receptive_field};
    case LayerKind::FcSubspace: return {spec.units * spec.k, g.fan_in};
    case LayerKind::Softmax: return {spec.units, g.fan_in};
  }
  return {};
}

std::size_t fan_out(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::ConvSubspace: return spec.units * spec.k * spec.receptive_field * spec.receptive_field;
    case LayerKind::FcSubspace: return spec.units * spec.k;
    case LayerKind::Softmax: return spec.units;
  }
  return 1;
}

}  // namespace

template <typename T>
Parameters<T> init_parameters(const ModelConfig& config, RngStream& rng) {
  config.validate();
  const auto geometry = model_geometry(config);
  Parameters<T> params;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    const Shape wshape = weight_shape(spec, geometry[i]);
    BasicTensor<T> weight(wshape);
    const double half_width = std::sqrt(6.0 / static_cast<double>(geometry[i].fan_in + fan_out(spec)));
    for (auto& w : weight.data()) w = static_cast<T>((2.0 * rng.uniform() - 1.0) * half_width);
    params.layers.push_back({std::move(weight), BasicTensor<T>({wshape[0]})});
  }
  return params;
}

template <typename T>
void check_parameters(const ModelConfig& config, const Parameters<T>& params) {
  const auto geometry = model_geometry(config);
  if (params.layers.size() != config.layers.size()) {
    throw DimensionError("parameters hold " + std::to_string(params.layers.size()) +
                         " layers, config has " + std::to_string(config.layers.size()));
  }
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const Shape wshape = weight_shape(config.layers[i], geometry[i]);
    if (params.layers[i].weight.shape() != wshape || params.layers[i].bias.shape() != Shape{wshape[0]}) {
      throw DimensionError("layer " + std::to_string(i) + ": weight " +
                           shape_string(params.layers[i].weight.shape()) + " expected " +
                           shape_string(wshape));
    }
  }
}

template <typename T>
ForwardResult<T> model_forward(const ModelConfig& config, const Parameters<T>& params,
                               const BasicTensor<T>& x, ForwardMode mode, RngStream& rng,
                               const ForwardOptions& options) {
  check_parameters(config, params);
  if (x.shape() != config.input_shape()) {
    throw DimensionError("model input " + shape_string(x.shape()) + " expected " +
                         shape_string(config.input_shape()));
  }
  const std::size_t hidden = config.subspace_layer_count();
  if (options.replay && options.replay->layers.size() != hidden) {
    throw DimensionError("replay trace has wrong layer count");
  }

  ForwardResult<T> result;
  result.trace.layers.resize(hidden);
  if (options.keep_activations) result.activations.push_back(x);

  BasicTensor<T> current = x;
  for (std::size_t i = 0; i < hidden; ++i) {
    const LayerSpec& spec = config.layers[i];
    const LayerParams<T>& lp = params.layers[i];
    const LayerTrace* replay = options.replay ? &options.replay->layers[i] : nullptr;
    LayerTrace& trace = result.trace.layers[i];

    BasicTensor<T> linmaps = spec.kind == LayerKind::ConvSubspace
                                 ? conv_forward(current, lp.weight, lp.bias)
                                 : affine(lp.weight, current.reshaped({current.size()}), lp.bias);
    const SubspacePoolSettings settings{spec.k, spec.unit_type, spec.lambda, mode, config.dropout};
    PooledUnits<T> pooled =
        subspace_pool_spatialwise(linmaps, settings, rng, replay ? &replay->selections : nullptr);
    trace.selections = std::move(pooled.selections);
    current = std::move(pooled.values);
    if (spec.pool) {
      SpatialPoolResult<T> sp = spatial_maxpool(current, spec.pool->size, spec.pool->stride,
                                                replay ? &replay->pool_argmax : nullptr);
      trace.pool_argmax = std::move(sp.argmax);
      current = std::move(sp.values);
    }
    if (options.keep_activations) result.activations.push_back(current);
  }

  const LayerParams<T>& out = params.layers.back();
  result.logits = affine(out.weight, current.reshaped({current.size()}), out.bias);
  result.output = softmax(result.logits);
  return result;
}

template <typename T>
void model_backward_accumulate(const ModelConfig& config, const Parameters<T>& params,
                               const ForwardResult<T>& forward, const BasicTensor<T>& grad_logits,
                               Parameters<T>& grads) {
  const std::size_t hidden = config.subspace_layer_count();
  if (forward.activations.size() != hidden + 1 || forward.trace.layers.size() != hidden) {
    throw DimensionError("model_backward: forward pass did not keep activations");
  }
  if (grad_logits.shape() != Shape{config.classes()}) {
    throw DimensionError("model_backward: gradient " + shape_string(grad_logits.shape()));
  }
  check_parameters(config, grads);

  // Softmax layer.
  const BasicTensor<T>& top = forward.activations.back();
  const std::size_t d = top.size();
  const std::size_t classes = config.classes();
  {
    auto& g = grads.layers.back();
    for (std::size_t c = 0; c < classes; ++c) {
      g.bias[c] += grad_logits[c];
      for (std::size_t j = 0; j < d; ++j) g.weight(c, j) += grad_logits[c] * top[j];
    }
  }
  BasicTensor<T> grad(top.shape());
  {
    const auto& w = params.layers.back().weight;
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t j = 0; j < d; ++j) grad[j] += w(c, j) * grad_logits[c];
    }
  }

  for (std::size_t li = hidden; li-- > 0;) {
    const LayerSpec& spec = config.layers[li];
    const LayerTrace& trace = forward.trace.layers[li];
    const BasicTensor<T>& input = forward.activations[li];
    if (grad.shape() != forward.activations[li + 1].shape()) {
      throw DimensionError("model_backward: stale activations at layer " + std::to_string(li));
    }
    BasicTensor<T> grad_units = spec.pool ? spatial_maxpool_backward(grad, trace.pool_argmax,
                                                                      trace.selections.shape())
                                          : std::move(grad);
    const BasicTensor<T> grad_lin = subspace_pool_backward(grad_units, trace.selections, spec.k);
    auto& g = grads.layers[li];
    const auto& lp = params.layers[li];
    const bool need_input_grad = li > 0;
    if (spec.kind == LayerKind::ConvSubspace) {
      BasicTensor<T> grad_input;
      conv_backward(input, lp.weight, grad_lin, g.weight, g.bias, need_input_grad ? &grad_input : nullptr);
      grad = std::move(grad_input);
    } else {
      const std::size_t rows = lp.weight.dim(0), cols = lp.weight.dim(1);
      const T* in = input.data().data();
      BasicTensor<T> grad_input(need_input_grad ? input.shape() : Shape{1});
      for (std::size_t r = 0; r < rows; ++r) {
        const T gr = grad_lin[r];
        if (gr == T{0}) continue;
        g.bias[r] += gr;
        T* gw = g.weight.data().data() + r * cols;
        const T* w = lp.weight.data().data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) gw[j] += gr * in[j];
        if (need_input_grad) {
          T* gi = grad_input.data().data();
          for (std::size_t j = 0; j < cols; ++j) gi[j] += gr * w[j];
        }
      }
      grad = std::move(grad_input);
    }
  }
}

template <typename T>
Parameters<T> model_backward(const ModelConfig& config, const Parameters<T>& params,
                             const ForwardResult<T>& forward, const BasicTensor<T>& grad_logits) {
  Parameters<T> grads = params.zeros_like();
  model_backward_accumulate(config, params, forward, grad_logits, grads);
  return grads;
}

template <typename T>
Parameters<T> halve_weights(const ModelConfig& config, const Parameters<T>& params) {
  check_parameters(config, params);
  Parameters<T> out = params;
  if (!config.dropout) return out;
  // The input is never dropped, so the first layer keeps its weights.
  for (std::size_t i = 1; i < out.layers.size(); ++i) {
    for (auto& w : out.layers[i].weight.data()) w *= T(0.5);
  }
  return out;
}

#define PROBOUT_INSTANTIATE_NETWORK(T)                                                             \
  template struct Parameters<T>;                                                                    \
  template Parameters<T> init_parameters(const ModelConfig&, RngStream&);                           \
  template void check_parameters(const ModelConfig&, const Parameters<T>&);                         \
  template ForwardResult<T> model_forward(const ModelConfig&, const Parameters<T>&,                 \
                                          const BasicTensor<T>&, ForwardMode, RngStream&,           \
                                          const ForwardOptions&);                                   \
  template void model_backward_accumulate(const ModelConfig&, const Parameters<T>&,                 \
                                          const ForwardResult<T>&, const BasicTensor<T>&,           \
                                          Parameters<T>&);                                          \
  template Parameters<T> model_backward(const ModelConfig&, const Parameters<T>&,                   \
                                        const ForwardResult<T>&, const BasicTensor<T>&);            \
  template Parameters<T> halve_weights(const ModelConfig&, const Parameters<T>&);

PROBOUT_INSTANTIATE_NETWORK(float)
PROBOUT_INSTANTIATE_NETWORK(double)

}  // namespace probout
