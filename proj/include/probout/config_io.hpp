#pragma once

#include <cstddef>
#include <string>

#include "probout/dataset.hpp"
#include "probout/model_config.hpp"
#include "probout/training.hpp"

namespace probout {

/// Both stages are off by default: whitening the white-noise synthetic images
/// equalises the few signal directions with the noise directions and stalls
/// training. CIFAR configs switch them on.
struct PreprocessSettings {
  bool contrast = false;
  double contrast_scale = 55.0;
  bool zca = false;
  double zca_eps = 1e-5;
};

/// Synthetic data generated as one pool and split by index into
/// [train | valid | test].
struct SyntheticData {
  SyntheticSpec spec{4, 750, 3, 16, 1.25, 1, 1};
  std::size_t train = 2000;
  std::size_t valid = 500;
};

/// Everything needed to reproduce one experiment.
struct ExperimentConfig {
  ModelConfig model = desk_config(4);
  SgdConfig sgd;
  PreprocessSettings preprocess;
  SyntheticData synthetic;
  std::size_t cifar_train_count = 40000;  // CIFAR-10: first N for training, rest for validation
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

std::string experiment_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; malformed input throws FormatError.
ExperimentConfig experiment_from_json(const std::string& text);
ExperimentConfig load_experiment(const std::string& path);

}  // namespace probout
