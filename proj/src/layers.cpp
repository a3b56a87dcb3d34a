#include "probout/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace probout {
namespace {

constexpr std::size_t kMaxK = 63;

void check_conv_shapes(const Shape& in, const Shape& filters, const Shape& bias) {
  if (in.size() != 3 || filters.size() != 4 || bias.size() != 1 || filters[1] != in[0] ||
      filters[2] != filters[3] || bias[0] != filters[0]) {
    throw DimensionError("conv: input " + shape_string(in) + ", filters " + shape_string(filters) +
                         ", bias " + shape_string(bias));
  }
  if (in[1] < filters[2] || in[2] < filters[2]) {
    throw DimensionError("conv: input " + shape_string(in) + " smaller than receptive field " +
                         std::to_string(filters[2]));
  }
}

}  // namespace

ProboutMode unit_mode(ForwardMode mode, bool dropout) {
  switch (mode) {
    case ForwardMode::Train: return dropout ? ProboutMode::TrainSampleDropout : ProboutMode::TrainSample;
    case ForwardMode::InferSample: return ProboutMode::InferSample;
    case ForwardMode::InferMax: return ProboutMode::InferMax;
    case ForwardMode::InferProbWeight: return ProboutMode::InferProbWeight;
  }
  return ProboutMode::InferMax;
}

template <typename T>
BasicTensor<T> conv_forward(const BasicTensor<T>& input, const BasicTensor<T>& filters,
                            const BasicTensor<T>& bias) {
  check_conv_shapes(input.shape(), filters.shape(), bias.shape());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = filters.dim(0), rf = filters.dim(2);
  const std::size_t oh = h - rf + 1, ow = w - rf + 1;
  BasicTensor<T> out({cout, oh, ow});
  const T* in = input.data().data();
  const T* f = filters.data().data();
  T* o = out.data().data();
  for (std::size_t co = 0; co < cout; ++co) {
    T* oplane = o + co * oh * ow;
    std::fill(oplane, oplane + oh * ow, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* iplane = in + ci * h * w;
      const T* fk = f + (co * cin + ci) * rf * rf;
      for (std::size_t ky = 0; ky < rf; ++ky) {
        for (std::size_t kx = 0; kx < rf; ++kx) {
          const T wv = fk[ky * rf + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* irow = iplane + (oy + ky) * w + kx;
            T* orow = oplane + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) orow[ox] += wv * irow[ox];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv_backward(const BasicTensor<T>& input, const BasicTensor<T>& filters,
                   const BasicTensor<T>& grad_out, BasicTensor<T>& grad_filters,
                   BasicTensor<T>& grad_bias, BasicTensor<T>* grad_input) {
  check_conv_shapes(input.shape(), filters.shape(), grad_bias.shape());
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = filters.dim(0), rf = filters.dim(2);
  const std::size_t oh = h - rf + 1, ow = w - rf + 1;
  if (grad_out.shape() != Shape{cout, oh, ow} || grad_filters.shape() != filters.shape()) {
    throw DimensionError("conv_backward: gradient shape mismatch " + shape_string(grad_out.shape()));
  }
  if (grad_input) {
    if (grad_input->shape() != input.shape()) *grad_input = BasicTensor<T>(input.shape());
    else grad_input->fill(T{0});
  }
  const T* in = input.data().data();
  const T* f = filters.data().data();
  const T* g = grad_out.data().data();
  T* gf = grad_filters.data().data();
  T* gi = grad_input ? grad_input->data().data() : nullptr;
  for (std::size_t co = 0; co < cout; ++co) {
    const T* gplane = g + co * oh * ow;
    T bsum = 0;
    for (std::size_t i = 0; i < oh * ow; ++i) bsum += gplane[i];
    grad_bias[co] += bsum;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* iplane = in + ci * h * w;
      const std::size_t fbase = (co * cin + ci) * rf * rf;
      for (std::size_t ky = 0; ky < rf; ++ky) {
        for (std::size_t kx = 0; kx < rf; ++kx) {
          T acc = 0;
          const T wv = f[fbase + ky * rf + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* irow = iplane + (oy + ky) * w + kx;
            const T* grow = gplane + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) acc += grow[ox] * irow[ox];
            if (gi) {
              T* girow = gi + ci * h * w + (oy + ky) * w + kx;
              for (std::size_t ox = 0; ox < ow; ++ox) girow[ox] += wv * grow[ox];
            }
          }
          gf[fbase + ky * rf + kx] += acc;
        }
      }
    }
  }
}

template <typename T>
PooledUnits<T> subspace_pool_spatialwise(const BasicTensor<T>& linmaps,
                                         const SubspacePoolSettings& settings, RngStream& rng,
                                         const IndexTensor* replay) {
  const std::size_t k = settings.k;
  if (linmaps.rank() == 0 || k == 0 || k > kMaxK || linmaps.dim(0) % k != 0) {
    throw DimensionError("subspace pool: " + std::to_string(linmaps.rank() ? linmaps.dim(0) : 0) +
                         " channels not divisible by k=" + std::to_string(k));
  }
  Shape unit_shape = linmaps.shape();
  unit_shape[0] /= k;
  const std::size_t units = unit_shape[0];
  const std::size_t positions = linmaps.size() / linmaps.dim(0);
  if (replay && replay->shape() != unit_shape) {
    throw DimensionError("subspace pool: stale selection trace " + shape_string(replay->shape()));
  }

  PooledUnits<T> out{BasicTensor<T>(unit_shape), IndexTensor(unit_shape)};
  const ProboutConfig cfg{settings.lambda, unit_mode(settings.mode, settings.dropout)};
  const bool probout = settings.unit_type == UnitType::Probout;
  const bool maxout_dropout = !probout && settings.mode == ForwardMode::Train && settings.dropout;
  if (probout) cfg.validate();

  const T* src = linmaps.data().data();
  std::array<double, kMaxK> z;
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t p = 0; p < positions; ++p) {
      const std::size_t slot = u * positions + p;
      for (std::size_t j = 0; j < k; ++j) z[j] = static_cast<double>(src[(u * k + j) * positions + p]);
      const std::span<const double> zs(z.data(), k);

      std::int32_t index;
      double value;
      if (replay) {
        index = (*replay)[slot];
        if (index == Selection::kDropped) {
          value = 0.0;
        } else if (index >= 0 && static_cast<std::size_t>(index) < k) {
          value = zs[index];
        } else {
          throw DimensionError("subspace pool: trace index out of range");
        }
      } else if (probout && cfg.mode == ProboutMode::InferProbWeight) {
        index = kProbWeighted;
        value = probability_weighted_value(zs, cfg.lambda);
      } else if (probout) {
        const Selection sel = probout_select(zs, cfg, rng);
        index = sel.index;
        value = sel.value;
      } else {
        const Selection sel = maxout_forward(zs);
        index = sel.index;
        value = sel.value;
        if (maxout_dropout && rng.uniform() < 0.5) {
          index = Selection::kDropped;
          value = 0.0;
        }
      }
      out.selections[slot] = index;
      out.values[slot] = static_cast<T>(value);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> subspace_pool_backward(const BasicTensor<T>& grad_units,
                                      const IndexTensor& selections, std::size_t k) {
  if (grad_units.shape() != selections.shape()) {
    throw DimensionError("subspace pool backward: stale selection trace");
  }
  Shape lin_shape = grad_units.shape();
  lin_shape[0] *= k;
  BasicTensor<T> grad(lin_shape);
  const std::size_t units = grad_units.dim(0);
  const std::size_t positions = grad_units.size() / units;
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t p = 0; p < positions; ++p) {
      const std::size_t slot = u * positions + p;
      const std::int32_t index = selections[slot];
      if (index == Selection::kDropped) continue;
      if (index < 0 || static_cast<std::size_t>(index) >= k) {
        throw ModeError("subspace pool backward: selection " + std::to_string(index) +
                        " is not differentiable");
      }
      grad[(u * k + static_cast<std::size_t>(index)) * positions + p] = grad_units[slot];
    }
  }
  return grad;
}

template <typename T>
SpatialPoolResult<T> spatial_maxpool(const BasicTensor<T>& input, std::size_t size,
                                     std::size_t stride, const IndexTensor* replay) {
  if (input.rank() != 3 || size == 0 || stride == 0) throw DimensionError("spatial_maxpool: bad arguments");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < size || w < size) {
    throw DimensionError("spatial_maxpool: window " + std::to_string(size) + " larger than input " +
                         shape_string(input.shape()));
  }
  const std::size_t oh = (h - size) / stride + 1, ow = (w - size) / stride + 1;
  SpatialPoolResult<T> out{BasicTensor<T>({c, oh, ow}), IndexTensor({c, oh, ow})};
  if (replay && replay->shape() != out.argmax.shape()) {
    throw DimensionError("spatial_maxpool: stale argmax trace");
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t slot = (ch * oh + oy) * ow + ox;
        std::size_t best;
        if (replay) {
          best = static_cast<std::size_t>((*replay)[slot]);
          if (best >= input.size()) throw DimensionError("spatial_maxpool: trace index out of range");
        } else {
          best = (ch * h + oy * stride) * w + ox * stride;
          for (std::size_t dy = 0; dy < size; ++dy) {
            for (std::size_t dx = 0; dx < size; ++dx) {
              const std::size_t idx = (ch * h + oy * stride + dy) * w + ox * stride + dx;
              if (input[idx] > input[best]) best = idx;
            }
          }
        }
        out.values[slot] = input[best];
        out.argmax[slot] = static_cast<std::int32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> spatial_maxpool_backward(const BasicTensor<T>& grad_out, const IndexTensor& argmax,
                                        const Shape& input_shape) {
  if (grad_out.shape() != argmax.shape()) throw DimensionError("spatial_maxpool_backward: stale trace");
  BasicTensor<T> grad(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) grad[static_cast<std::size_t>(argmax[i])] += grad_out[i];
  return grad;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 1) throw DimensionError("softmax: expected a vector");
  const T zmax = *std::max_element(logits.data().begin(), logits.data().end());
  BasicTensor<T> out(logits.shape());
  T total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - zmax);
    total += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
  return out;
}

template <typename T>
BasicTensor<T> softmax_output(const BasicTensor<T>& h, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias) {
  return softmax(affine(weights, h, bias));
}

#define PROBOUT_INSTANTIATE_LAYERS(T)                                                              \
  template BasicTensor<T> conv_forward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                       const BasicTensor<T>&);                                      \
  template void conv_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                              BasicTensor<T>&, BasicTensor<T>&, BasicTensor<T>*);                   \
  template PooledUnits<T> subspace_pool_spatialwise(const BasicTensor<T>&,                          \
                                                    const SubspacePoolSettings&, RngStream&,        \
                                                    const IndexTensor*);                            \
  template BasicTensor<T> subspace_pool_backward(const BasicTensor<T>&, const IndexTensor&,         \
                                                 std::size_t);                                      \
  template SpatialPoolResult<T> spatial_maxpool(const BasicTensor<T>&, std::size_t, std::size_t,    \
                                                const IndexTensor*);                                \
  template BasicTensor<T> spatial_maxpool_backward(const BasicTensor<T>&, const IndexTensor&,       \
                                                   const Shape&);                                   \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                           \
  template BasicTensor<T> softmax_output(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                         const BasicTensor<T>&);

PROBOUT_INSTANTIATE_LAYERS(float)
PROBOUT_INSTANTIATE_LAYERS(double)

}  // namespace probout
