#include "probout/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace probout {
namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

template <typename T>
std::size_t one_hot_label(const BasicTensor<T>& y) {
  std::size_t label = y.size();
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == T{1} && label == y.size()) {
      label = i;
    } else if (y[i] != T{0}) {
      throw LabelError("target vector is not one-hot");
    }
  }
  if (label == y.size()) throw LabelError("target vector is not one-hot");
  return label;
}

}  // namespace

template <typename T>
double cross_entropy(const BasicTensor<T>& o, std::size_t label, LossKind kind) {
  if (o.rank() != 1) throw DimensionError("cross_entropy: expected a probability vector");
  if (label >= o.size()) throw LabelError("label " + std::to_string(label) + " out of range");
  if (kind == LossKind::Categorical) return -std::log(clamp_probability(o[label]));
  double loss = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double p = clamp_probability(static_cast<double>(o[i]));
    loss -= i == label ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

template <typename T>
double cross_entropy(const BasicTensor<T>& o, const BasicTensor<T>& y, LossKind kind) {
  if (o.shape() != y.shape()) throw DimensionError("cross_entropy: shape mismatch");
  return cross_entropy(o, one_hot_label(y), kind);
}

template <typename T>
BasicTensor<T> loss_gradient_logits(const BasicTensor<T>& o, std::size_t label, LossKind kind) {
  if (label >= o.size()) throw LabelError("label " + std::to_string(label) + " out of range");
  BasicTensor<T> grad(o.shape());
  if (kind == LossKind::Categorical) {
    for (std::size_t i = 0; i < o.size(); ++i) grad[i] = o[i] - (i == label ? T{1} : T{0});
    return grad;
  }
  // Softmax Jacobian applied to dL/do, rearranged so no 1/(1 - o_j) survives:
  //   g_y = -c_y - sum_{j != y} o_y o_j / c_j
  //   g_k = 2 o_k - sum_{j not in {y, k}} o_k o_j / c_j
  // with c_j = 1 - o_j taken as the sum of the other outputs. Each o_k / c_j
  // (k != j) is at most 1, so a saturated wrong class cannot blow up the step.
  const std::size_t n = o.size();
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) {
    double rest = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      if (m != j) rest += static_cast<double>(o[m]);
    }
    c[j] = rest;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double ok = static_cast<double>(o[k]);
    double g = k == label ? -c[k] : 2.0 * ok;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k || j == label || c[j] <= 0.0) continue;
      g -= std::min(ok / c[j], 1.0) * static_cast<double>(o[j]);
    }
    grad[k] = static_cast<T>(g);
  }
  return grad;
}

template <typename T>
BasicTensor<T> one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw LabelError("label out of range");
  BasicTensor<T> y({classes});
  y[label] = T{1};
  return y;
}

#define PROBOUT_INSTANTIATE_LOSS(T)                                                            \
  template double cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&, LossKind);       \
  template double cross_entropy(const BasicTensor<T>&, std::size_t, LossKind);                 \
  template BasicTensor<T> loss_gradient_logits(const BasicTensor<T>&, std::size_t, LossKind);  \
  template BasicTensor<T> one_hot(std::size_t, std::size_t);

PROBOUT_INSTANTIATE_LOSS(float)
PROBOUT_INSTANTIATE_LOSS(double)

}  // namespace probout
