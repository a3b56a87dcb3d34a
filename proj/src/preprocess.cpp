#include "probout/preprocess.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace probout {

Tensor contrast_normalize(const Tensor& images, double scale, double eps) {
  if (images.rank() < 2) throw DimensionError("contrast_normalize: expected [n, ...] images");
  Tensor out = images;
  const std::size_t n = images.dim(0);
  const std::size_t d = images.size() / n;
  for (std::size_t i = 0; i < n; ++i) {
    float* px = out.data().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += px[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (px[j] - mean) * (px[j] - mean);
    const double sd = std::max(std::sqrt(var / static_cast<double>(d)), eps);
    for (std::size_t j = 0; j < d; ++j) px[j] = static_cast<float>(scale * (px[j] - mean) / sd);
  }
  return out;
}

ZcaModel zca_fit(const Tensor& train_images, double eps) {
  if (train_images.rank() < 2) throw DimensionError("zca_fit: expected [n, ...] images");
  if (!(eps > 0.0)) throw std::invalid_argument("zca_fit: eps must be positive");
  const auto n = static_cast<Eigen::Index>(train_images.dim(0));
  const auto d = static_cast<Eigen::Index>(train_images.size() / train_images.dim(0));
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
      train_images.data().data(), n, d);
  const Eigen::MatrixXd x = raw.cast<double>();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("zca_fit: eigendecomposition failed");
  const Eigen::VectorXd scale =
      (eig.eigenvalues().array().max(0.0) + eps).rsqrt().matrix();
  Eigen::MatrixXd w = eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
  w = 0.5 * (w + w.transpose());

  ZcaModel model;
  model.eps = eps;
  model.mean = Tensor64({static_cast<std::size_t>(d)}, std::vector<double>(mean.data(), mean.data() + d));
  model.whitening = Tensor64({static_cast<std::size_t>(d), static_cast<std::size_t>(d)});
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      model.whitening.data().data(), d, d) = w;
  return model;
}

Tensor zca_apply(const ZcaModel& model, const Tensor& images) {
  if (!model.fitted()) throw std::logic_error("zca_apply: model has not been fitted");
  if (images.rank() < 2) throw DimensionError("zca_apply: expected [n, ...] images");
  const auto n = static_cast<Eigen::Index>(images.dim(0));
  const auto d = static_cast<Eigen::Index>(images.size() / images.dim(0));
  if (static_cast<std::size_t>(d) != model.mean.size()) {
    throw DimensionError("zca_apply: images have " + std::to_string(d) + " features, model expects " +
                         std::to_string(model.mean.size()));
  }
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
      images.data().data(), n, d);
  Eigen::Map<const Eigen::RowVectorXd> mean(model.mean.data().data(), d);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      model.whitening.data().data(), d, d);
  const Eigen::MatrixXd white = (raw.cast<double>().rowwise() - mean) * w;
  Tensor out(images.shape());
  Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data().data(), n, d) =
      white.cast<float>();
  return out;
}

void PreprocessModel::fit(const Dataset& train) {
  if (train.size() == 0) throw DatasetError("cannot fit preprocessing on an empty dataset");
  if (zca) {
    const Tensor base = contrast ? contrast_normalize(train.images, contrast_scale, contrast_eps) : train.images;
    whitening = zca_fit(base, whitening.eps);
  }
}

Dataset PreprocessModel::apply(const Dataset& data) const {
  Dataset out = data;
  if (data.size() == 0) return out;
  if (contrast) out.images = contrast_normalize(out.images, contrast_scale, contrast_eps);
  if (zca) out.images = zca_apply(whitening, out.images);
  return out;
}

Tensor shift_image(const Tensor& image, long dy, long dx) {
  if (image.rank() != 3) throw DimensionError("shift_image: expected [c, h, w]");
  const long c = static_cast<long>(image.dim(0)), h = static_cast<long>(image.dim(1)),
             w = static_cast<long>(image.dim(2));
  Tensor out(image.shape());
  for (long ch = 0; ch < c; ++ch) {
    for (long y = 0; y < h; ++y) {
      const long sy = y - dy;
      if (sy < 0 || sy >= h) continue;
      for (long x = 0; x < w; ++x) {
        const long sx = x - dx;
        if (sx < 0 || sx >= w) continue;
        out[static_cast<std::size_t>((ch * h + y) * w + x)] = image[static_cast<std::size_t>((ch * h + sy) * w + sx)];
      }
    }
  }
  return out;
}

Tensor horizontal_flip(const Tensor& image) {
  if (image.rank() != 3) throw DimensionError("horizontal_flip: expected [c, h, w]");
  Tensor out(image.shape());
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out(ch, y, x) = image(ch, y, w - 1 - x);
    }
  }
  return out;
}

Tensor augment_example(const Tensor& image, RngStream& rng, std::size_t max_shift, bool flip) {
  if (image.rank() != 3) throw DimensionError("augment: expected [c, h, w]");
  if (max_shift >= image.dim(2) || max_shift >= image.dim(1)) {
    throw std::invalid_argument("augment: max shift must be smaller than the image");
  }
  Tensor out = image;
  if (max_shift > 0) {
    const auto span = 2 * max_shift + 1;
    const long dy = static_cast<long>(rng.uniform_index(span)) - static_cast<long>(max_shift);
    const long dx = static_cast<long>(rng.uniform_index(span)) - static_cast<long>(max_shift);
    out = shift_image(out, dy, dx);
  }
  if (flip && rng.uniform() < 0.5) out = horizontal_flip(out);
  return out;
}

Dataset augment(const Dataset& data, RngStream& rng, std::size_t max_shift, bool flip) {
  Dataset out = data;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.set_example(i, augment_example(data.example(i), rng, max_shift, flip));
  }
  return out;
}

}  // namespace probout
