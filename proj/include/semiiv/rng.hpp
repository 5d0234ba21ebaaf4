#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace semiiv {

// Philox4x32-10 block function (Salmon et al., Random123). Counter-based: the
// output depends only on (counter, key), so any draw can be recomputed without
// replaying the ones before it.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

// One reproducible stream of draws. The key is the user seed; the upper half of
// the counter is the stream id and the lower half is the draw index. Distinct
// stream ids therefore never overlap, and every column of a simulated dataset
// gets its own stream, independent of the order in which columns are drawn.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; both variates of each pair are used.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  // Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;  // remaining u64 words in buffer_ (0, 1 or 2)
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Child seed for replicate `index` of experiment cell `cell`, derived from the
// base seed through the Philox block function.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t cell, std::uint64_t index);

// Stream ids used by the simulators and the bootstrap.
namespace streams {
inline constexpr std::uint64_t kConfounder = 1;
inline constexpr std::uint64_t kNoiseX = 2;
inline constexpr std::uint64_t kNoiseY = 3;
inline constexpr std::uint64_t kInstrumentBase = 16;        // + instrument index
inline constexpr std::uint64_t kBootstrapBase = 1ULL << 32;  // + replicate index
}  // namespace streams

}  // namespace semiiv
