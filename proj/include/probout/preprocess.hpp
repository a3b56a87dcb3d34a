#pragma once

#include "probout/dataset.hpp"
#include "probout/rng.hpp"
#include "probout/tensor.hpp"

namespace probout {

inline constexpr double kDefaultContrastScale = 55.0;
inline constexpr double kDefaultContrastEps = 1e-8;
inline constexpr double kDefaultZcaEps = 1e-5;

/// Per image: subtract its mean, divide by max(std, eps), multiply by scale.
/// `images` is [n, ...]; each leading slice is one image.
Tensor contrast_normalize(const Tensor& images, double scale = kDefaultContrastScale,
                          double eps = kDefaultContrastEps);

/// ZCA whitening fitted on flattened training images.
struct ZcaModel {
  Tensor64 mean;       // [d]
  Tensor64 whitening;  // [d, d], symmetric
  double eps = kDefaultZcaEps;

  bool fitted() const noexcept { return !whitening.empty(); }
};

/// W = U diag(1 / sqrt(s + eps)) U^T from the eigendecomposition of the
/// training covariance (normalised by n).
ZcaModel zca_fit(const Tensor& train_images, double eps = kDefaultZcaEps);

/// (x - mean) W for every image; throws std::logic_error if not fitted.
Tensor zca_apply(const ZcaModel& model, const Tensor& images);

/// Contrast normalisation followed by ZCA, fitted on a training split and then
/// applied unchanged to any other split.
struct PreprocessModel {
  bool contrast = true;
  double contrast_scale = kDefaultContrastScale;
  double contrast_eps = kDefaultContrastEps;
  bool zca = true;
  ZcaModel whitening;

  void fit(const Dataset& train);
  Dataset apply(const Dataset& data) const;
};

/// Integer shift with zero fill; positive dy moves content down, positive dx
/// moves it right. Image is [c, h, w].
Tensor shift_image(const Tensor& image, long dy, long dx);
Tensor horizontal_flip(const Tensor& image);

/// Per example: uniform shift in [-max_shift, max_shift]^2, then a horizontal
/// flip with probability 0.5 when `flip` is set.
Tensor augment_example(const Tensor& image, RngStream& rng, std::size_t max_shift, bool flip);
Dataset augment(const Dataset& data, RngStream& rng, std::size_t max_shift, bool flip);

}  // namespace probout
