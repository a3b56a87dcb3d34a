#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "probout/tensor.hpp"

namespace probout {

enum class LayerKind { ConvSubspace, FcSubspace, Softmax };
enum class UnitType { Maxout, Probout };

struct PoolSpec {
  std::size_t size = 2;
  std::size_t stride = 2;
};

struct LayerSpec {
  LayerKind kind = LayerKind::FcSubspace;
  std::size_t units = 1;  // pooled units; class count for the softmax layer
  std::size_t k = 1;
  std::size_t receptive_field = 0;  // conv only
  std::optional<PoolSpec> pool;     // conv only
  UnitType unit_type = UnitType::Maxout;
  double lambda = 1.0;

  bool is_subspace() const noexcept { return kind != LayerKind::Softmax; }
};

/// Layer topology. The last layer is always the softmax layer.
struct ModelConfig {
  std::size_t in_channels = 3;
  std::size_t in_height = 32;
  std::size_t in_width = 32;
  std::vector<LayerSpec> layers;
  bool dropout = true;  // dropout on every hidden unit during training

  Shape input_shape() const { return {in_channels, in_height, in_width}; }
  std::size_t classes() const { return layers.back().units; }
  std::size_t subspace_layer_count() const { return layers.size() - 1; }

  /// Throws std::invalid_argument (or DimensionError for geometry) on any
  /// inconsistency.
  void validate() const;
};

/// Extents at each stage of one layer.
struct LayerGeometry {
  Shape input;     // [c,h,w] for conv, [d] for fc/softmax
  Shape linear;    // [units*k, H, W] or [units*k]
  Shape unit;      // after subspace pooling
  Shape output;    // after optional spatial pooling
  std::size_t fan_in = 0;
};

std::vector<LayerGeometry> model_geometry(const ModelConfig& config);

std::string layer_name(const ModelConfig& config, std::size_t layer);

/// Five-layer CIFAR model: conv 48/128/128 with k=2 (rf 8/8/1, 4x4 stride-2
/// pools after the first two), fc 240 with k=5, softmax. Spatial extents run
/// 32 -> 25 -> 11 -> 4 -> 1.
ModelConfig preliminary_cifar_config(UnitType unit_type = UnitType::Probout);

/// Desk-scale version on 16x16 inputs: conv 8/16/16 (k=2), fc 32 (k=5).
ModelConfig desk_config(std::size_t classes, std::size_t channels = 3, std::size_t size = 16,
                        UnitType unit_type = UnitType::Probout);

/// Same topology with every subspace layer switched to `unit_type`.
ModelConfig with_unit_type(ModelConfig config, UnitType unit_type);

std::vector<double> layer_lambdas(const ModelConfig& config);
void set_layer_lambdas(ModelConfig& config, const std::vector<double>& lambdas);

}  // namespace probout
