#pragma once

#include <cstddef>

#include "probout/tensor.hpp"

namespace probout {

enum class LossKind {
  /// -sum_i [y_i log o_i + (1 - y_i) log(1 - o_i)]
  BinarySum,
  /// -sum_i y_i log o_i
  Categorical,
};

inline constexpr double kProbabilityClamp = 1e-12;

/// y must be one-hot (throws LabelError otherwise). Probabilities are clamped
/// to [1e-12, 1 - 1e-12] before taking logs.
template <typename T>
double cross_entropy(const BasicTensor<T>& o, const BasicTensor<T>& y, LossKind kind);

template <typename T>
double cross_entropy(const BasicTensor<T>& o, std::size_t label, LossKind kind);

/// dL/d(logits) where o = softmax(logits).
template <typename T>
BasicTensor<T> loss_gradient_logits(const BasicTensor<T>& o, std::size_t label, LossKind kind);

template <typename T>
BasicTensor<T> one_hot(std::size_t label, std::size_t classes);

}  // namespace probout
