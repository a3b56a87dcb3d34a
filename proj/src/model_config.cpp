#include "probout/model_config.hpp"

#include <stdexcept>

namespace probout {

void ModelConfig::validate() const {
  if (in_channels == 0 || in_height == 0 || in_width == 0) {
    throw std::invalid_argument("model input extents must be positive");
  }
  if (layers.empty() || layers.back().kind != LayerKind::Softmax) {
    throw std::invalid_argument("model must end with a softmax layer");
  }
  bool seen_fc = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& spec = layers[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (spec.units == 0) throw std::invalid_argument(where + "units must be positive");
    if (spec.kind == LayerKind::Softmax && i + 1 != layers.size()) {
      throw std::invalid_argument(where + "softmax must be the last layer");
    }
    if (spec.is_subspace()) {
      if (spec.k == 0) throw std::invalid_argument(where + "k must be at least 1");
      if (spec.unit_type == UnitType::Probout && !(spec.lambda > 0.0)) {
        throw std::invalid_argument(where + "lambda must be positive");
      }
    }
    if (spec.kind == LayerKind::ConvSubspace) {
      if (seen_fc) throw std::invalid_argument(where + "conv layer after fully connected layer");
      if (spec.receptive_field == 0) throw std::invalid_argument(where + "receptive field must be >= 1");
      if (spec.pool && (spec.pool->size == 0 || spec.pool->stride == 0)) {
        throw std::invalid_argument(where + "pool size and stride must be >= 1");
      }
    } else {
      if (spec.receptive_field != 0 || spec.pool) {
        throw std::invalid_argument(where + "receptive field / pooling only apply to conv layers");
      }
      if (spec.kind == LayerKind::FcSubspace) seen_fc = true;
    }
  }
  model_geometry(*this);
}

std::vector<LayerGeometry> model_geometry(const ModelConfig& config) {
  std::vector<LayerGeometry> out;
  Shape current = config.input_shape();
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    LayerGeometry g;
    g.input = current;
    if (spec.kind == LayerKind::ConvSubspace) {
      const std::size_t c = current[0], h = current[1], w = current[2];
      const std::size_t rf = spec.receptive_field;
      if (h < rf || w < rf) {
        throw DimensionError("layer " + std::to_string(i) + ": input " + shape_string(current) +
                             " smaller than receptive field " + std::to_string(rf));
      }
      const std::size_t oh = h - rf + 1, ow = w - rf + 1;
      g.linear = {spec.units * spec.k, oh, ow};
      g.unit = {spec.units, oh, ow};
      g.fan_in = c * rf * rf;
      if (spec.pool) {
        if (oh < spec.pool->size || ow < spec.pool->size) {
          throw DimensionError("layer " + std::to_string(i) + ": pooling window larger than " +
                               shape_string(g.unit));
        }
        g.output = {spec.units, (oh - spec.pool->size) / spec.pool->stride + 1,
                    (ow - spec.pool->size) / spec.pool->stride + 1};
      } else {
        g.output = g.unit;
      }
    } else {
      const std::size_t d = shape_volume(current);
      g.input = {d};
      g.fan_in = d;
      if (spec.kind == LayerKind::FcSubspace) {
        g.linear = {spec.units * spec.k};
        g.unit = {spec.units};
      } else {
        g.linear = {spec.units};
        g.unit = {spec.units};
      }
      g.output = g.unit;
    }
    current = g.output;
    out.push_back(std::move(g));
  }
  return out;
}

std::string layer_name(const ModelConfig& config, std::size_t layer) {
  std::size_t conv = 0, fc = 0;
  for (std::size_t i = 0; i <= layer && i < config.layers.size(); ++i) {
    switch (config.layers[i].kind) {
      case LayerKind::ConvSubspace: ++conv; break;
      case LayerKind::FcSubspace: ++fc; break;
      case LayerKind::Softmax: break;
    }
  }
  switch (config.layers.at(layer).kind) {
    case LayerKind::ConvSubspace: return "conv" + std::to_string(conv);
    case LayerKind::FcSubspace: return "fc" + std::to_string(fc);
    case LayerKind::Softmax: return "softmax";
  }
  return "layer" + std::to_string(layer);
}

namespace {

LayerSpec conv_layer(std::size_t units, std::size_t k, std::size_t rf, std::optional<PoolSpec> pool,
                     UnitType type, double lambda) {
  LayerSpec spec;
  spec.kind = LayerKind::ConvSubspace;
  spec.units = units;
  spec.k = k;
  spec.receptive_field = rf;
  spec.pool = pool;
  spec.unit_type = type;
  spec.lambda = lambda;
  return spec;
}

LayerSpec fc_layer(std::size_t units, std::size_t k, UnitType type, double lambda) {
  LayerSpec spec;
  spec.kind = LayerKind::FcSubspace;
  spec.units = units;
  spec.k = k;
  spec.unit_type = type;
  spec.lambda = lambda;
  return spec;
}

LayerSpec softmax_layer(std::size_t classes) {
  LayerSpec spec;
  spec.kind = LayerKind::Softmax;
  spec.units = classes;
  return spec;
}

}  // namespace

ModelConfig preliminary_cifar_config(UnitType unit_type) {
  ModelConfig config;
  config.in_channels = 3;
  config.in_height = 32;
  config.in_width = 32;
  // Unpadded convolution leaves a 1x1 map after the second pool, so the third
  // conv layer can only use a 1x1 receptive field.
  config.layers = {
      conv_layer(48, 2, 8, PoolSpec{4, 2}, unit_type, 1.0),
      conv_layer(128, 2, 8, PoolSpec{4, 2}, unit_type, 2.0),
      conv_layer(128, 2, 1, std::nullopt, unit_type, 3.0),
      fc_layer(240, 5, unit_type, 4.0),
      softmax_layer(10),
  };
  return config;
}

ModelConfig desk_config(std::size_t classes, std::size_t channels, std::size_t size,
                        UnitType unit_type) {
  ModelConfig config;
  config.in_channels = channels;
  config.in_height = size;
  config.in_width = size;
  config.layers = {
      conv_layer(8, 2, 5, PoolSpec{2, 2}, unit_type, 1.0),
      conv_layer(16, 2, 3, PoolSpec{2, 2}, unit_type, 2.0),
      conv_layer(16, 2, 2, std::nullopt, unit_type, 3.0),
      fc_layer(32, 5, unit_type, 4.0),
      softmax_layer(classes),
  };
  config.validate();
  return config;
}

ModelConfig with_unit_type(ModelConfig config, UnitType unit_type) {
  for (auto& layer : config.layers) {
    if (layer.is_subspace()) layer.unit_type = unit_type;
  }
  return config;
}

std::vector<double> layer_lambdas(const ModelConfig& config) {
  std::vector<double> out;
  for (const auto& layer : config.layers) {
    if (layer.is_subspace()) out.push_back(layer.lambda);
  }
  return out;
}

void set_layer_lambdas(ModelConfig& config, const std::vector<double>& lambdas) {
  if (lambdas.size() != config.subspace_layer_count()) {
    throw std::invalid_argument("expected one lambda per subspace layer");
  }
  std::size_t i = 0;
  for (auto& layer : config.layers) {
    if (layer.is_subspace()) layer.lambda = lambdas[i++];
  }
}

}  // namespace probout
