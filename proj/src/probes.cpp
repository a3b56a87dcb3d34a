#include "probout/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <stdexcept>

#include "probout/preprocess.hpp"

namespace probout {

Tensor translate_image(const Tensor& image, long dy) {
  if (image.rank() != 3) throw DimensionError("translate_image: expected [c, h, w]");
  if (std::labs(dy) >= static_cast<long>(image.dim(1))) {
    throw std::invalid_argument("translate_image: shift " + std::to_string(dy) + " not smaller than image height");
  }
  return shift_image(image, dy, 0);
}

namespace {

// Exact values at multiples of 90 degrees so that 0/360 and 180 rotations
// resample the pixel grid exactly.
std::pair<double, double> cos_sin_degrees(double degrees) {
  double reduced = std::fmod(degrees, 360.0);
  if (reduced < 0) reduced += 360.0;
  if (reduced == 0.0) return {1.0, 0.0};
  if (reduced == 90.0) return {0.0, 1.0};
  if (reduced == 180.0) return {-1.0, 0.0};
  if (reduced == 270.0) return {0.0, -1.0};
  const double rad = reduced * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

}  // namespace

Tensor rotate_image(const Tensor& image, double degrees) {
  if (image.rank() != 3) throw DimensionError("rotate_image: expected [c, h, w]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto [cs, sn] = cos_sin_degrees(degrees);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  Tensor out(image.shape());
  auto pixel = [&](std::size_t ch, long y, long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    return image(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse map with rows pointing down, so counter-clockwise as displayed.
      const double ox = static_cast<double>(x) - cx;
      const double oy = static_cast<double>(y) - cy;
      const double sx = cx + cs * ox - sn * oy;
      const double sy = cy + sn * ox + cs * oy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = (1 - ay) * ((1 - ax) * pixel(ch, y0, x0) + (ax > 0 ? ax * pixel(ch, y0, x0 + 1) : 0.0));
        if (ay > 0) v += ay * ((1 - ax) * pixel(ch, y0 + 1, x0) + (ax > 0 ? ax * pixel(ch, y0 + 1, x0 + 1) : 0.0));
        out(ch, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

template <typename T>
double feature_distance(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("feature_distance: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  const double sa = na > 0 ? 1.0 / na : 0.0;
  const double sb = nb > 0 ? 1.0 / nb : 0.0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) * sa - static_cast<double>(b[i]) * sb;
    d2 += diff * diff;
  }
  return std::min(std::sqrt(d2), 2.0);
}

template double feature_distance(const BasicTensor<float>&, const BasicTensor<float>&);
template double feature_distance(const BasicTensor<double>&, const BasicTensor<double>&);

std::string transform_name(TransformKind kind) {
  return kind == TransformKind::Translate ? "translate" : "rotate";
}

TransformSweep translation_sweep(int max_pixels) {
  TransformSweep sweep{TransformKind::Translate, {}};
  for (int d = -max_pixels; d <= max_pixels; ++d) sweep.magnitudes.push_back(d);
  return sweep;
}

TransformSweep rotation_sweep(double step_degrees) {
  if (!(step_degrees > 0.0)) throw std::invalid_argument("rotation step must be positive");
  TransformSweep sweep{TransformKind::Rotate, {}};
  const auto steps = static_cast<int>(std::floor(360.0 / step_degrees + 1e-9));
  for (int i = 0; i <= steps; ++i) sweep.magnitudes.push_back(std::min(i * step_degrees, 360.0));
  if (sweep.magnitudes.back() != 360.0) sweep.magnitudes.push_back(360.0);
  return sweep;
}

std::vector<ProbeRecord> invariance_curve(const ModelConfig& config, const Parameters<float>& params,
                                          const std::vector<Tensor>& images,
                                          const std::vector<std::size_t>& image_ids,
                                          const std::vector<TransformSweep>& sweeps,
                                          const std::vector<std::size_t>& layers) {
  if (images.empty()) throw std::invalid_argument("invariance_curve: no images");
  if (image_ids.size() != images.size()) throw std::invalid_argument("invariance_curve: one id per image");
  if (sweeps.empty() || layers.empty()) throw std::invalid_argument("invariance_curve: empty sweep or layer list");
  for (const auto& s : sweeps) {
    if (s.magnitudes.empty()) throw std::invalid_argument("invariance_curve: empty sweep");
  }
  for (std::size_t l : layers) {
    if (l >= config.subspace_layer_count()) throw std::invalid_argument("invariance_curve: not a subspace layer");
  }

  RngStream unused(0);
  auto features = [&](const Tensor& x) {
    return model_forward(config, params, x, ForwardMode::InferMax, unused, {.keep_activations = true}).activations;
  };

  std::vector<ProbeRecord> rows;
  for (const auto& sweep : sweeps) {
    // sums[m][l] accumulates distances for the mean rows.
    std::vector<std::vector<double>> sums(sweep.magnitudes.size(), std::vector<double>(layers.size(), 0.0));
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto base = features(images[i]);
      for (std::size_t m = 0; m < sweep.magnitudes.size(); ++m) {
        const double mag = sweep.magnitudes[m];
        const Tensor moved = sweep.kind == TransformKind::Translate
                                 ? translate_image(images[i], static_cast<long>(std::lround(mag)))
                                 : rotate_image(images[i], mag);
        const auto feats = features(moved);
        for (std::size_t li = 0; li < layers.size(); ++li) {
          const std::size_t l = layers[li];
          const double d = feature_distance(base[l + 1], feats[l + 1]);
          sums[m][li] += d;
          rows.push_back({sweep.kind, mag, layer_name(config, l), image_ids[i], d});
        }
      }
    }
    for (std::size_t m = 0; m < sweep.magnitudes.size(); ++m) {
      for (std::size_t li = 0; li < layers.size(); ++li) {
        rows.push_back({sweep.kind, sweep.magnitudes[m], layer_name(config, layers[li]), std::nullopt,
                        sums[m][li] / static_cast<double>(images.size())});
      }
    }
  }
  return rows;
}

std::string probe_csv(const std::vector<ProbeRecord>& records) {
  std::string out = "transform,magnitude,layer,image-id,distance\n";
  for (const auto& r : records) {
    out += fmt::format("{},{:g},{},{},{:.8f}\n", transform_name(r.transform), r.magnitude, r.layer,
                       r.image_id ? std::to_string(*r.image_id) : std::string("mean"), r.distance);
  }
  return out;
}

FilterGrid filter_grid(const ModelConfig& config, const Parameters<float>& params, std::size_t layer) {
  check_parameters(config, params);
  if (layer >= config.layers.size() || config.layers[layer].kind != LayerKind::ConvSubspace) {
    throw std::invalid_argument("export_filters: layer " + std::to_string(layer) + " is not a convolutional layer");
  }
  const LayerSpec& spec = config.layers[layer];
  const Tensor& weights = params.layers[layer].weight;
  const std::size_t cin = weights.dim(1), rf = spec.receptive_field;
  const bool rgb = cin == 3;
  const std::size_t tile_w = rf, tile_h = rgb ? rf : rf * cin;
  const std::size_t units = spec.units, k = spec.k;
  const auto unit_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(units))));
  const std::size_t unit_rows = (units + unit_cols - 1) / unit_cols;

  FilterGrid grid;
  grid.tile_width = tile_w;
  grid.tile_height = tile_h;
  PnmImage& img = grid.image;
  img.channels = rgb ? 3 : 1;
  img.width = unit_cols * k * (tile_w + 1) + 1;
  img.height = unit_rows * (tile_h + 1) + 1;
  img.pixels.assign(img.width * img.height * img.channels, 0);
  img.comment = fmt::format("layer={} units={} k={} rf={} normalization=per-filter-minmax", layer_name(config, layer),
                            units, k, rf);

  const std::size_t filter_volume = cin * rf * rf;
  for (std::size_t f = 0; f < units * k; ++f) {
    const std::size_t u = f / k, j = f % k;
    const std::size_t oy = (u / unit_cols) * (tile_h + 1) + 1;
    const std::size_t ox = ((u % unit_cols) * k + j) * (tile_w + 1) + 1;
    grid.origins.emplace_back(oy, ox);
    const float* w = weights.data().data() + f * filter_volume;
    const auto [lo, hi] = std::minmax_element(w, w + filter_volume);
    const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
    for (std::size_t ch = 0; ch < cin; ++ch) {
      for (std::size_t y = 0; y < rf; ++y) {
        for (std::size_t x = 0; x < rf; ++x) {
          const double v = w[(ch * rf + y) * rf + x];
          const auto q = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (v - *lo) / range))
                                   : std::uint8_t{128};
          const std::size_t py = oy + (rgb ? y : ch * rf + y);
          const std::size_t pc = rgb ? ch : 0;
          img.pixels[((py * img.width) + ox + x) * img.channels + pc] = q;
        }
      }
    }
  }
  return grid;
}

void export_filters(const ModelConfig& config, const Parameters<float>& params, std::size_t layer,
                    const std::string& path) {
  write_pnm(path, filter_grid(config, params, layer).image);
}

SamplingReport sampling_frequency_check(std::span<const double> z, double lambda, std::size_t draws,
                                        RngStream& rng, ProboutMode mode) {
  if (draws < 1000) throw std::invalid_argument("sampling_frequency_check: need at least 1000 draws");
  const bool dropout = mode == ProboutMode::TrainSampleDropout;
  if (mode != ProboutMode::TrainSample && mode != ProboutMode::InferSample && !dropout) {
    throw ModeError("sampling_frequency_check: mode does not sample");
  }
  const std::size_t outcomes = z.size() + (dropout ? 1 : 0);
  SamplingReport report;
  report.draws = draws;
  report.expected.resize(outcomes);
  if (dropout) dropout_probs(z, lambda, report.expected);
  else boltzmann_probs(z, lambda, report.expected);

  std::vector<std::size_t> counts(outcomes, 0);
  const ProboutConfig cfg{lambda, mode};
  for (std::size_t n = 0; n < draws; ++n) {
    const Selection sel = probout_select(z, cfg, rng);
    const std::size_t slot = sel.dropped() ? 0 : static_cast<std::size_t>(sel.index) + (dropout ? 1 : 0);
    ++counts[slot];
  }
  const double nd = static_cast<double>(draws);
  report.passed = true;
  for (std::size_t i = 0; i < outcomes; ++i) {
    const double p = report.expected[i];
    const double freq = static_cast<double>(counts[i]) / nd;
    const double sigma = std::sqrt(p * (1.0 - p) / nd);
    const double diff = std::abs(freq - p);
    // A zero-variance outcome deviates infinitely unless it matches exactly;
    // a deviation below one draw's worth of frequency is treated as exact.
    const double dev = sigma > 0 ? diff / sigma : (diff < 0.5 / nd ? 0.0 : INFINITY);
    report.observed.push_back(freq);
    report.deviation_sigma.push_back(dev);
    report.max_deviation_sigma = std::max(report.max_deviation_sigma, dev);
    if (dev > 4.0) report.passed = false;
  }
  return report;
}

std::string sampling_report_csv(const SamplingReport& report) {
  std::string out = "outcome,expected,observed,deviation_sigma\n";
  for (std::size_t i = 0; i < report.expected.size(); ++i) {
    out += fmt::format("{},{:.8f},{:.8f},{:.4f}\n", i, report.expected[i], report.observed[i],
                       report.deviation_sigma[i]);
  }
  out += fmt::format("# draws={} max_deviation_sigma={:.4f} passed={}\n", report.draws, report.max_deviation_sigma,
                     report.passed ? "true" : "false");
  return out;
}

}  // namespace probout
