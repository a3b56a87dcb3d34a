#pragma once

#include <cstddef>

#include "probout/model_config.hpp"
#include "probout/rng.hpp"
#include "probout/subspace.hpp"
#include "probout/tensor.hpp"

namespace probout {

/// Network-wide evaluation mode. Each subspace layer maps it to a unit
/// behavior according to its unit type (see unit_mode()).
enum class ForwardMode { Train, InferSample, InferMax, InferProbWeight };

/// Selection code for a unit evaluated by probability weighting. Such a pass
/// has no trace to backpropagate through.
inline constexpr std::int32_t kProbWeighted = -2;

/// How one subspace layer evaluates its units.
struct SubspacePoolSettings {
  std::size_t k = 1;
  UnitType unit_type = UnitType::Maxout;
  double lambda = 1.0;
  ForwardMode mode = ForwardMode::InferMax;
  bool dropout = false;  // only consulted in ForwardMode::Train
};

template <typename T>
struct PooledUnits {
  BasicTensor<T> values;   // [units, ...]
  IndexTensor selections;  // same shape; sub-unit index, Selection::kDropped or kProbWeighted
};

template <typename T>
struct SpatialPoolResult {
  BasicTensor<T> values;
  IndexTensor argmax;  // flat index into the pooled input
};

/// Valid cross-correlation: input [cin,h,w], filters [cout,cin,rf,rf],
/// bias [cout] -> [cout, h-rf+1, w-rf+1].
template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const BasicTensor<T>& filters,
                            const BasicTensor<T>& bias);

/// Accumulates filter and bias gradients; writes the input gradient when
/// grad_input is non-null.
template <typename T>
void conv_backward(const BasicTensor<T>& input, const BasicTensor<T>& filters,
                   const BasicTensor<T>& grad_out, BasicTensor<T>& grad_filters,
                   BasicTensor<T>& grad_bias, BasicTensor<T>* grad_input);

/// Pools each group of k sibling channels (channel u*k + j is sub-unit j of
/// unit u) at every location. With `replay`, recorded selections are reused
/// instead of sampling.
template <typename T>
PooledUnits<T> subspace_pool_spatialwise(const BasicTensor<T>& linmaps,
                                         const SubspacePoolSettings& settings, RngStream& rng,
                                         const IndexTensor* replay = nullptr);

/// Scatters unit gradients back onto the selected sibling channels.
template <typename T>
BasicTensor<T> subspace_pool_backward(const BasicTensor<T>& grad_units,
                                      const IndexTensor& selections, std::size_t k);

/// Max over size x size windows with the given stride; ties go to the first
/// window position in scan order.
template <typename T>
SpatialPoolResult<T> spatial_maxpool(const BasicTensor<T>& input, std::size_t size,
                                     std::size_t stride, const IndexTensor* replay = nullptr);

template <typename T>
BasicTensor<T> spatial_maxpool_backward(const BasicTensor<T>& grad_out, const IndexTensor& argmax,
                                        const Shape& input_shape);

/// Numerically stabilized softmax of a logit vector.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// softmax(W h + b)
template <typename T>
BasicTensor<T> softmax_output(const BasicTensor<T>& h, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias);

ProboutMode unit_mode(ForwardMode mode, bool dropout);

}  // namespace probout
