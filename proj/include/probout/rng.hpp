#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace probout {

/// Counter-based random stream (Philox4x32-10). Each output block is a pure
/// function of (seed, stream id, counter), so a stream can be reproduced or
/// forked without sharing mutable state with any other stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Standard normal deviate (Box-Muller, no cached second value).
  double normal() noexcept;

  /// Child stream determined by (seed, this stream id, label) only; the draw
  /// position of the parent is irrelevant.
  RngStream fork(std::uint64_t label) const noexcept;

  /// The raw Philox4x32-10 block for a counter, exposed for tests.
  static std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                   std::array<std::uint32_t, 2> key) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
};

/// Well-mixed 64-bit seed derived from (seed, label).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) noexcept;

/// Inverse-CDF draw of an index with probability p[i]. Requires p[i] >= 0 and
/// |sum(p) - 1| <= 1e-6; throws ProbabilityError otherwise. Rounding residue
/// beyond the last cumulative sum goes to the last index with positive mass.
std::size_t multinomial_draw(std::span<const double> p, RngStream& rng);

}  // namespace probout
