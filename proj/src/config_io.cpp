#include "probout/config_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace probout {

using nlohmann::json;

namespace {

std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::ConvSubspace: return "conv";
    case LayerKind::FcSubspace: return "fc";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind parse_kind(const std::string& s) {
  if (s == "conv") return LayerKind::ConvSubspace;
  if (s == "fc") return LayerKind::FcSubspace;
  if (s == "softmax") return LayerKind::Softmax;
  throw FormatError("unknown layer kind '" + s + "'");
}

UnitType parse_unit(const std::string& s) {
  if (s == "maxout") return UnitType::Maxout;
  if (s == "probout") return UnitType::Probout;
  throw FormatError("unknown unit type '" + s + "'");
}

LossKind parse_loss(const std::string& s) {
  if (s == "binary-sum") return LossKind::BinarySum;
  if (s == "categorical") return LossKind::Categorical;
  throw FormatError("unknown loss '" + s + "'");
}

json model_to_json(const ModelConfig& config) {
  json layers = json::array();
  for (const auto& l : config.layers) {
    json j{{"kind", kind_name(l.kind)}, {"units", l.units}};
    if (l.is_subspace()) {
      j["k"] = l.k;
      j["unit"] = l.unit_type == UnitType::Probout ? "probout" : "maxout";
      j["lambda"] = l.lambda;
    }
    if (l.kind == LayerKind::ConvSubspace) j["rf"] = l.receptive_field;
    if (l.pool) j["pool"] = {l.pool->size, l.pool->stride};
    layers.push_back(std::move(j));
  }
  return json{{"input", {config.in_channels, config.in_height, config.in_width}},
              {"dropout", config.dropout},
              {"layers", std::move(layers)}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig config;
  const auto input = j.at("input").get<std::vector<std::size_t>>();
  if (input.size() != 3) throw FormatError("model input must be [channels, height, width]");
  config.in_channels = input[0];
  config.in_height = input[1];
  config.in_width = input[2];
  config.dropout = j.value("dropout", true);
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = parse_kind(lj.at("kind").get<std::string>());
    l.units = lj.at("units").get<std::size_t>();
    if (l.is_subspace()) {
      l.k = lj.value("k", std::size_t{1});
      l.unit_type = parse_unit(lj.value("unit", std::string("maxout")));
      l.lambda = lj.value("lambda", 1.0);
    }
    if (l.kind == LayerKind::ConvSubspace) l.receptive_field = lj.at("rf").get<std::size_t>();
    if (lj.contains("pool")) {
      const auto p = lj.at("pool").get<std::vector<std::size_t>>();
      if (p.size() != 2) throw FormatError("pool must be [size, stride]");
      l.pool = PoolSpec{p[0], p[1]};
    }
    config.layers.push_back(l);
  }
  config.validate();
  return config;
}

template <typename F>
auto wrap_json_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return model_to_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  return wrap_json_errors([&] { return model_from_json(json::parse(text)); });
}

std::string experiment_to_json(const ExperimentConfig& c) {
  const auto& s = c.sgd;
  json j{
      {"model", model_to_json(c.model)},
      {"sgd",
       {{"batch_size", s.batch_size},
        {"learning_rate", s.learning_rate},
        {"lr_decay", s.lr_decay},
        {"momentum", s.momentum},
        {"epochs_max", s.epochs_max},
        {"patience", s.patience},
        {"seed", s.seed},
        {"loss", s.loss == LossKind::BinarySum ? "binary-sum" : "categorical"},
        {"valid_evaluations", s.valid_evaluations},
        {"augment_shift", s.augment_shift},
        {"augment_flip", s.augment_flip}}},
      {"preprocess",
       {{"contrast", c.preprocess.contrast},
        {"contrast_scale", c.preprocess.contrast_scale},
        {"zca", c.preprocess.zca},
        {"zca_eps", c.preprocess.zca_eps}}},
      {"synthetic",
       {{"classes", c.synthetic.spec.classes},
        {"per_class", c.synthetic.spec.per_class},
        {"channels", c.synthetic.spec.channels},
        {"image_size", c.synthetic.spec.image_size},
        {"noise", c.synthetic.spec.noise},
        {"jitter", c.synthetic.spec.jitter},
        {"seed", c.synthetic.spec.seed},
        {"train", c.synthetic.train},
        {"valid", c.synthetic.valid}}},
      {"cifar_train_count", c.cifar_train_count},
  };
  return j.dump(2);
}

ExperimentConfig experiment_from_json(const std::string& text) {
  return wrap_json_errors([&] {
    const json j = json::parse(text);
    ExperimentConfig c;
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("sgd")) {
      const json& s = j.at("sgd");
      c.sgd.batch_size = s.value("batch_size", c.sgd.batch_size);
      c.sgd.learning_rate = s.value("learning_rate", c.sgd.learning_rate);
      c.sgd.lr_decay = s.value("lr_decay", c.sgd.lr_decay);
      c.sgd.momentum = s.value("momentum", c.sgd.momentum);
      c.sgd.epochs_max = s.value("epochs_max", c.sgd.epochs_max);
      c.sgd.patience = s.value("patience", c.sgd.patience);
      c.sgd.seed = s.value("seed", c.sgd.seed);
      if (s.contains("loss")) c.sgd.loss = parse_loss(s.at("loss").get<std::string>());
      c.sgd.valid_evaluations = s.value("valid_evaluations", c.sgd.valid_evaluations);
      c.sgd.augment_shift = s.value("augment_shift", c.sgd.augment_shift);
      c.sgd.augment_flip = s.value("augment_flip", c.sgd.augment_flip);
      c.sgd.validate();
    }
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      c.preprocess.contrast = p.value("contrast", c.preprocess.contrast);
      c.preprocess.contrast_scale = p.value("contrast_scale", c.preprocess.contrast_scale);
      c.preprocess.zca = p.value("zca", c.preprocess.zca);
      c.preprocess.zca_eps = p.value("zca_eps", c.preprocess.zca_eps);
    }
    if (j.contains("synthetic")) {
      const json& s = j.at("synthetic");
      auto& spec = c.synthetic.spec;
      spec.classes = s.value("classes", spec.classes);
      spec.per_class = s.value("per_class", spec.per_class);
      spec.channels = s.value("channels", spec.channels);
      spec.image_size = s.value("image_size", spec.image_size);
      spec.noise = s.value("noise", spec.noise);
      spec.jitter = s.value("jitter", spec.jitter);
      spec.seed = s.value("seed", spec.seed);
      c.synthetic.train = s.value("train", c.synthetic.train);
      c.synthetic.valid = s.value("valid", c.synthetic.valid);
    }
    c.cifar_train_count = j.value("cifar_train_count", c.cifar_train_count);
    return c;
  });
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return experiment_from_json(buffer.str());
}

}  // namespace probout
