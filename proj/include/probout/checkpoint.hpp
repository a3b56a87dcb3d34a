#pragma once

#include <cstdint>
#include <string>

#include "probout/model_config.hpp"
#include "probout/network.hpp"
#include "probout/training.hpp"

namespace probout {

/// Binary layout (all integers little-endian):
///   "PRBTCKPT"                  8-byte magic
///   u32 version                 currently 1
///   u32 n, n bytes              model config as JSON
///   u64 epoch, u64 seed
///   u32 m, m x f64, i32         lambda schedule: initial values, epochs_total
///   u32 layers, then per layer weight and bias tensors, each as
///     u32 rank, rank x u32 extents, f32 values
struct Checkpoint {
  ModelConfig config;
  Parameters<float> params;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  LambdaSchedule schedule;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, unsupported version or truncation.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace probout
