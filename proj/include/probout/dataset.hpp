#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probout/tensor.hpp"

namespace probout {

/// Labeled images stored as one [n, c, h, w] tensor.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t classes = 10;

  std::size_t size() const noexcept { return labels.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  std::size_t image_volume() const { return images.size() / std::max<std::size_t>(size(), 1); }

  Tensor example(std::size_t i) const;
  void set_example(std::size_t i, const Tensor& image);

  /// Throws DatasetError if counts disagree or a label is out of range.
  void validate() const;
};

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Examples [begin, end).
Dataset slice(const Dataset& data, std::size_t begin, std::size_t end);

Dataset concatenate(const Dataset& a, const Dataset& b);

/// First `train_count` examples for training, the rest for validation.
std::pair<Dataset, Dataset> split_train_valid(const Dataset& data, std::size_t train_count);

/// Reads one or more files in the CIFAR-10 binary layout (3073-byte records:
/// label byte, then 32x32 R, G and B planes). Pixels are scaled to [0, 1].
Dataset load_cifar10_binary(const std::vector<std::string>& paths);
Dataset load_cifar10_binary(const std::string& path);

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t per_class = 100;
  std::size_t channels = 3;
  std::size_t image_size = 16;
  double noise = 1.0;        // per-pixel Gaussian noise standard deviation
  std::size_t jitter = 0;    // max random shift of the class pattern, in pixels
  std::uint64_t seed = 1;
};

/// Each class owns a prototype made of a few coloured Gaussian blobs; samples
/// are a (optionally jittered) prototype plus pixel noise. Labels cycle
/// 0, 1, ..., C-1 so every prefix of C*m examples is exactly balanced.
Dataset make_synthetic(const SyntheticSpec& spec);

/// Prototype images used by make_synthetic, [classes, c, h, w].
Tensor synthetic_prototypes(const SyntheticSpec& spec);

}  // namespace probout
