#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace omt {

/// Philox4x32-10 counter-based generator.
///
/// A (seed, stream) pair selects an independent sequence; the block counter
/// advances within the stream. Path i of an ensemble always uses stream i,
/// so its draws do not depend on how many paths are simulated or on how
/// paths are partitioned across threads. Satisfies UniformRandomBitGenerator.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in the open interval (0, 1), 53 random bits.
  double uniform();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int index_ = 4;
};

/// Mixes a user seed with a purpose tag so distinct consumers get distinct keys.
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t purpose);

namespace rng_purpose {
inline constexpr std::uint64_t diffusion = 1;
inline constexpr std::uint64_t jumps = 2;
inline constexpr std::uint64_t defaults = 3;
inline constexpr std::uint64_t sample_states = 4;
}  // namespace rng_purpose

}  // namespace omt
