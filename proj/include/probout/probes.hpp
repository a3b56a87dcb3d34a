#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probout/image_io.hpp"
#include "probout/network.hpp"
#include "probout/rng.hpp"
#include "probout/subspace.hpp"

namespace probout {

/// Vertical integer shift of a [c, h, w] image with zero fill; positive dy
/// moves content down. Throws std::invalid_argument if |dy| >= h.
Tensor translate_image(const Tensor& image, long dy);

/// Rotation by `degrees` (counter-clockwise) about the image centre with
/// bilinear interpolation; samples outside the image read as zero. Multiples
/// of 90 degrees use exact sine/cosine values.
Tensor rotate_image(const Tensor& image, double degrees);

/// Euclidean distance between the L2-normalised, flattened arguments. A zero
/// vector stays zero; the distance is 0 when both are zero.
template <typename T>
double feature_distance(const BasicTensor<T>& a, const BasicTensor<T>& b);

enum class TransformKind { Translate, Rotate };

std::string transform_name(TransformKind kind);

struct TransformSweep {
  TransformKind kind = TransformKind::Translate;
  std::vector<double> magnitudes;
};

/// -15..15 pixels, step 1.
TransformSweep translation_sweep(int max_pixels = 15);
/// 0..360 degrees inclusive.
TransformSweep rotation_sweep(double step_degrees = 10.0);

struct ProbeRecord {
  TransformKind transform = TransformKind::Translate;
  double magnitude = 0.0;
  std::string layer;
  std::optional<std::size_t> image_id;  // nullopt marks the mean over all images
  double distance = 0.0;
};

/// For every sweep, image, magnitude and requested subspace layer, the
/// distance between features of the transformed and untransformed image,
/// followed by the per-(magnitude, layer) mean over images. Features are
/// taken after spatial pooling from a deterministic max-mode pass.
std::vector<ProbeRecord> invariance_curve(const ModelConfig& config, const Parameters<float>& params,
                                          const std::vector<Tensor>& images,
                                          const std::vector<std::size_t>& image_ids,
                                          const std::vector<TransformSweep>& sweeps,
                                          const std::vector<std::size_t>& layers);

/// Header: transform,magnitude,layer,image-id,distance
std::string probe_csv(const std::vector<ProbeRecord>& records);

/// First-layer style filter visualisation: the k filters of each unit sit in
/// adjacent tiles, each filter min-max normalised on its own (a constant
/// filter becomes mid-gray). Three input channels give an RGB image; other
/// channel counts stack the channels vertically inside a grayscale tile.
struct FilterGrid {
  PnmImage image;
  std::size_t tile_width = 0;
  std::size_t tile_height = 0;
  std::vector<std::pair<std::size_t, std::size_t>> origins;  // (y, x) of each filter's tile
};

FilterGrid filter_grid(const ModelConfig& config, const Parameters<float>& params, std::size_t layer);
void export_filters(const ModelConfig& config, const Parameters<float>& params, std::size_t layer,
                    const std::string& path);

struct SamplingReport {
  std::vector<double> expected;  // per outcome; index 0 is dropout in dropout mode
  std::vector<double> observed;
  std::vector<double> deviation_sigma;
  double max_deviation_sigma = 0.0;
  std::size_t draws = 0;
  bool passed = false;  // every outcome within 4 sigma
};

/// Draws N probout selections and compares outcome frequencies with the
/// expected distribution. Requires N >= 1000 and a sampling mode.
SamplingReport sampling_frequency_check(std::span<const double> z, double lambda, std::size_t draws,
                                        RngStream& rng, ProboutMode mode = ProboutMode::TrainSample);

std::string sampling_report_csv(const SamplingReport& report);

}  // namespace probout
