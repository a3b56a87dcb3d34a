#include "probout/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "probout/rng.hpp"

namespace probout {

Tensor Dataset::example(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("example index out of range");
  const std::size_t v = image_volume();
  const auto begin = images.data().begin() + static_cast<std::ptrdiff_t>(i * v);
  return Tensor(image_shape(), std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(v)));
}

void Dataset::set_example(std::size_t i, const Tensor& image) {
  if (i >= size() || image.shape() != image_shape()) throw DimensionError("set_example: shape mismatch");
  std::copy(image.data().begin(), image.data().end(), images.data().begin() + static_cast<std::ptrdiff_t>(i * image.size()));
}

void Dataset::validate() const {
  if (labels.empty()) {
    if (!images.empty()) throw DatasetError("dataset has images but no labels");
    return;
  }
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw DatasetError("dataset holds " + std::to_string(labels.size()) + " labels for images " +
                       shape_string(images.shape()));
  }
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DatasetError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.classes = data.classes;
  if (indices.empty()) return out;
  const std::size_t v = data.image_volume();
  Shape shape = data.images.shape();
  shape[0] = indices.size();
  std::vector<float> pixels;
  pixels.reserve(indices.size() * v);
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw std::out_of_range("subset index out of range");
    const auto begin = data.images.data().begin() + static_cast<std::ptrdiff_t>(idx * v);
    pixels.insert(pixels.end(), begin, begin + static_cast<std::ptrdiff_t>(v));
    out.labels.push_back(data.labels[idx]);
  }
  out.images = Tensor(std::move(shape), std::move(pixels));
  return out;
}

Dataset slice(const Dataset& data, std::size_t begin, std::size_t end) {
  if (begin > end || end > data.size()) throw std::out_of_range("slice out of range");
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return subset(data, idx);
}

Dataset concatenate(const Dataset& a, const Dataset& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.image_shape() != b.image_shape() || a.classes != b.classes) {
    throw DatasetError("cannot concatenate datasets with different image shapes or class counts");
  }
  Dataset out;
  out.classes = a.classes;
  Shape shape = a.images.shape();
  shape[0] = a.size() + b.size();
  std::vector<float> pixels(a.images.values());
  pixels.insert(pixels.end(), b.images.values().begin(), b.images.values().end());
  out.images = Tensor(std::move(shape), std::move(pixels));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

std::pair<Dataset, Dataset> split_train_valid(const Dataset& data, std::size_t train_count) {
  if (train_count > data.size()) throw DatasetError("training split larger than dataset");
  return {slice(data, 0, train_count), slice(data, train_count, data.size())};
}

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

}  // namespace

Dataset load_cifar10_binary(const std::vector<std::string>& paths) {
  std::vector<float> pixels;
  std::vector<int> labels;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open CIFAR-10 file: " + path);
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % kCifarRecord != 0) {
      throw DatasetError(path + ": truncated file (" + std::to_string(bytes.size()) +
                         " bytes is not a multiple of 3073)");
    }
    for (std::size_t r = 0; r < bytes.size() / kCifarRecord; ++r) {
      const unsigned char* rec = bytes.data() + r * kCifarRecord;
      if (rec[0] >= 10) {
        throw DatasetError(path + ": record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
      }
      labels.push_back(rec[0]);
      for (std::size_t p = 0; p < kCifarPixels; ++p) pixels.push_back(static_cast<float>(rec[1 + p]) / 255.0f);
    }
  }
  if (labels.empty()) throw DatasetError("CIFAR-10 input contains no records");
  Dataset out;
  out.classes = 10;
  out.images = Tensor({labels.size(), 3, kCifarSide, kCifarSide}, std::move(pixels));
  out.labels = std::move(labels);
  return out;
}

Dataset load_cifar10_binary(const std::string& path) { return load_cifar10_binary(std::vector<std::string>{path}); }

namespace {

constexpr std::size_t kBlobsPerClass = 3;

void check_synthetic(const SyntheticSpec& spec) {
  if (spec.classes == 0 || spec.per_class == 0 || spec.channels == 0 || spec.image_size == 0) {
    throw std::invalid_argument("synthetic dataset sizes must be positive");
  }
  if (spec.noise < 0.0) throw std::invalid_argument("synthetic noise must be non-negative");
}

}  // namespace

Tensor synthetic_prototypes(const SyntheticSpec& spec) {
  check_synthetic(spec);
  const std::size_t c = spec.channels, s = spec.image_size;
  Tensor protos({spec.classes, c, s, s});
  RngStream root(spec.seed, 0x5eed);
  for (std::size_t cls = 0; cls < spec.classes; ++cls) {
    RngStream rng = root.fork(cls);
    for (std::size_t b = 0; b < kBlobsPerClass; ++b) {
      const double cy = rng.uniform() * static_cast<double>(s - 1);
      const double cx = rng.uniform() * static_cast<double>(s - 1);
      const double sigma = static_cast<double>(s) * (0.08 + 0.12 * rng.uniform());
      std::vector<double> colour(c);
      for (auto& a : colour) a = 2.0 * rng.uniform() - 1.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < s; ++y) {
          for (std::size_t x = 0; x < s; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            protos[((cls * c + ch) * s + y) * s + x] += static_cast<float>(colour[ch] * g);
          }
        }
      }
    }
  }
  return protos;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  const Tensor protos = synthetic_prototypes(spec);
  const std::size_t c = spec.channels, s = spec.image_size, v = c * s * s;
  const std::size_t n = spec.classes * spec.per_class;
  Dataset out;
  out.classes = spec.classes;
  out.images = Tensor({n, c, s, s});
  out.labels.resize(n);
  const RngStream root(spec.seed, 0xda7a);
  const auto jitter = static_cast<long>(spec.jitter);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = i % spec.classes;
    out.labels[i] = static_cast<int>(cls);
    RngStream rng = root.fork(i);
    long dy = 0, dx = 0;
    if (jitter > 0) {
      dy = static_cast<long>(rng.uniform_index(2 * spec.jitter + 1)) - jitter;
      dx = static_cast<long>(rng.uniform_index(2 * spec.jitter + 1)) - jitter;
    }
    float* dst = out.images.data().data() + i * v;
    const float* proto = protos.data().data() + cls * v;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          const long sy = static_cast<long>(y) - dy, sx = static_cast<long>(x) - dx;
          float value = 0.0f;
          if (sy >= 0 && sx >= 0 && sy < static_cast<long>(s) && sx < static_cast<long>(s)) {
            value = proto[(ch * s + static_cast<std::size_t>(sy)) * s + static_cast<std::size_t>(sx)];
          }
          if (spec.noise > 0.0) value += static_cast<float>(spec.noise * rng.normal());
          dst[(ch * s + y) * s + x] = value;
        }
      }
    }
  }
  return out;
}

}  // namespace probout
