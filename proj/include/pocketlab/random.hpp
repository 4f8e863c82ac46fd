#pragma once

#include <array>
#include <cstdint>

namespace pocketlab {

// Philox4x32-10 block function (Salmon et al., counter-based RNG).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

// Key for path `index` of an experiment seeded with `seed`.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t index) { return splitmix64(seed) ^ index; }

// Counter-based stream: the output sequence is a pure function of the key, so
// any path can be regenerated independently of scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();

  std::uint64_t blocks_used() const { return block_; }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pocketlab
