// Independent reference implementations used as test oracles. None of these
// call into the library code they check.
#pragma once

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "probout/dataset.hpp"
#include "probout/loss.hpp"
#include "probout/network.hpp"
#include "probout/tensor.hpp"

namespace oracle {

using HighPrecision = boost::multiprecision::cpp_dec_float_50;

/// exp(lambda z_i) / sum_j exp(lambda z_j) evaluated in 50 decimal digits with
/// no stabilisation.
inline std::vector<double> boltzmann(const std::vector<double>& z, double lambda) {
  std::vector<HighPrecision> e;
  HighPrecision sum = 0;
  for (double v : z) {
    e.push_back(boost::multiprecision::exp(HighPrecision(lambda) * HighPrecision(v)));
    sum += e.back();
  }
  std::vector<double> p;
  for (const auto& v : e) p.push_back(static_cast<double>(v / sum));
  return p;
}

inline std::vector<double> affine(const std::vector<std::vector<double>>& w, const std::vector<double>& v,
                                  const std::vector<double>& b) {
  std::vector<double> out(b);
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += w[i][j] * v[j];
  }
  return out;
}

/// Valid cross-correlation written as six plain loops.
inline probout::Tensor64 conv(const probout::Tensor64& in, const probout::Tensor64& f, const probout::Tensor64& b) {
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t cout = f.dim(0), rf = f.dim(2);
  probout::Tensor64 out({cout, h - rf + 1, w - rf + 1});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y + rf <= h; ++y)
      for (std::size_t x = 0; x + rf <= w; ++x) {
        double acc = b[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t dy = 0; dy < rf; ++dy)
            for (std::size_t dx = 0; dx < rf; ++dx) acc += f[((o * cin + c) * rf + dy) * rf + dx] * in(c, y + dy, x + dx);
        out(o, y, x) = acc;
      }
  return out;
}

/// Every window scanned exhaustively; strict '>' keeps the first maximum.
inline probout::Tensor64 maxpool(const probout::Tensor64& in, std::size_t size, std::size_t stride) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t oh = (h - size) / stride + 1, ow = (w - size) / stride + 1;
  probout::Tensor64 out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        double best = in(ch, y * stride, x * stride);
        for (std::size_t dy = 0; dy < size; ++dy)
          for (std::size_t dx = 0; dx < size; ++dx) best = std::max(best, in(ch, y * stride + dy, x * stride + dx));
        out(ch, y, x) = best;
      }
  return out;
}

/// Central difference with step h.
template <typename F>
double central_difference(F&& f, double& param, double h = 1e-5) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * h);
}

/// |a - n| / max(|a|, |n|); pairs that are both below `floor` in magnitude
/// are compared absolutely against the floor instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-9) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace oracle

/// 6x6 input, two conv subspace layers (k=2), fc with k=3, three classes.
inline probout::ModelConfig toy_config(probout::UnitType unit = probout::UnitType::Probout, bool dropout = true) {
  using namespace probout;
  ModelConfig c;
  c.in_channels = 2;
  c.in_height = 6;
  c.in_width = 6;
  c.dropout = dropout;
  LayerSpec conv1{LayerKind::ConvSubspace, 3, 2, 3, PoolSpec{2, 1}, unit, 1.0};
  LayerSpec conv2{LayerKind::ConvSubspace, 2, 2, 2, std::nullopt, unit, 2.0};
  LayerSpec fc{LayerKind::FcSubspace, 4, 3, 0, std::nullopt, unit, 1.5};
  LayerSpec out{LayerKind::Softmax, 3, 1, 0, std::nullopt, UnitType::Maxout, 1.0};
  c.layers = {conv1, conv2, fc, out};
  c.validate();
  return c;
}

template <typename T>
probout::BasicTensor<T> random_tensor(const probout::Shape& shape, probout::RngStream& rng, double scale = 1.0) {
  probout::BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

/// Largest relative error between model_backward and central differences over
/// `probes` randomly chosen parameters. The forward pass samples a trace in
/// training mode; every perturbed evaluation replays it.
inline double gradient_check(const probout::ModelConfig& config, probout::Parameters<double> params,
                             const probout::Tensor64& x, std::size_t label, probout::LossKind loss,
                             probout::RngStream& rng, std::size_t probes) {
  using namespace probout;
  const auto fwd = model_forward(config, params, x, ForwardMode::Train, rng, {.keep_activations = true});
  const auto grads = model_backward(config, params, fwd, loss_gradient_logits(fwd.output, label, loss));
  const ForwardOptions replay{false, &fwd.trace};
  auto objective = [&] {
    RngStream unused(0);
    return cross_entropy(model_forward(config, params, x, ForwardMode::Train, unused, replay).output, label, loss);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < probes; ++i) {
    const std::size_t flat = rng.uniform_index(params.parameter_count());
    const double numeric = oracle::central_difference(objective, params.at(flat));
    worst = std::max(worst, oracle::relative_error(grads.at(flat), numeric));
  }
  return worst;
}

/// Two well separated classes on 3x8x8 images and a one-hidden-layer model.
struct BlobTask {
  probout::ModelConfig config;
  probout::Dataset train, valid;
};

inline BlobTask blob_task() {
  using namespace probout;
  BlobTask t;
  t.config.in_channels = 3;
  t.config.in_height = 8;
  t.config.in_width = 8;
  t.config.layers = {LayerSpec{LayerKind::FcSubspace, 8, 2, 0, std::nullopt, UnitType::Probout, 1.0},
                     LayerSpec{LayerKind::Softmax, 2, 1, 0, std::nullopt, UnitType::Maxout, 1.0}};
  t.config.validate();
  const Dataset all = make_synthetic(SyntheticSpec{2, 150, 3, 8, 0.5, 0, 21});
  t.train = slice(all, 0, 200);
  t.valid = slice(all, 200, 300);
  return t;
}

inline std::filesystem::path test_dir(const std::string& name) {
  const auto dir = std::filesystem::path(PROBOUT_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
