#include "probout/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "probout/config_io.hpp"
#include "probout/file_io.hpp"

namespace probout {
namespace {

constexpr char kMagic[8] = {'P', 'R', 'B', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) f32(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  const char* bytes(std::size_t n) {
    if (n > in_.size() - pos_) throw FormatError("checkpoint truncated");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes(4));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes(8));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw FormatError("checkpoint: bad tensor rank");
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& d : shape) {
      d = u32();
      if (d == 0) throw FormatError("checkpoint: zero tensor extent");
      volume *= d;
      if (volume > (in_.size() - pos_) / 4) throw FormatError("checkpoint truncated");
    }
    std::vector<float> data(volume);
    for (auto& v : data) v = f32();
    return Tensor(std::move(shape), std::move(data));
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  check_parameters(ckpt.config, ckpt.params);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const std::string config = model_config_to_json(ckpt.config);
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  w.u64(ckpt.epoch);
  w.u64(ckpt.seed);
  w.u32(static_cast<std::uint32_t>(ckpt.schedule.initial.size()));
  for (double v : ckpt.schedule.initial) w.f64(v);
  w.u32(static_cast<std::uint32_t>(ckpt.schedule.epochs_total));
  w.u32(static_cast<std::uint32_t>(ckpt.params.layers.size()));
  for (const auto& layer : ckpt.params.layers) {
    w.tensor(layer.weight);
    w.tensor(layer.bias);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.bytes(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t config_len = r.u32();
  ckpt.config = model_config_from_json(std::string(r.bytes(config_len), config_len));
  ckpt.epoch = r.u64();
  ckpt.seed = r.u64();
  ckpt.schedule.initial.resize(r.u32());
  if (ckpt.schedule.initial.size() > bytes.size()) throw FormatError("checkpoint truncated");
  for (auto& v : ckpt.schedule.initial) v = r.f64();
  ckpt.schedule.epochs_total = static_cast<int>(r.u32());
  const std::uint32_t layers = r.u32();
  if (layers != ckpt.config.layers.size()) throw FormatError("checkpoint layer count does not match its config");
  for (std::uint32_t i = 0; i < layers; ++i) {
    Tensor weight = r.tensor();
    Tensor bias = r.tensor();
    ckpt.params.layers.push_back({std::move(weight), std::move(bias)});
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  try {
    check_parameters(ckpt.config, ckpt.params);
  } catch (const DimensionError& e) {
    throw FormatError(std::string("checkpoint parameters do not match config: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace probout
