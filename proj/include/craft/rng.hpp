#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace craft {

// splitmix64 step; also the finalizer used to derive stream keys.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Deterministic, splittable random stream.
///
/// A stream is identified by a 64-bit key obtained by folding a root seed with a
/// path of labels. The key is expanded into xoshiro256** state with splitmix64.
/// Children derive from the parent's key, never from its consumed state, so the
/// draws of a child do not depend on how much the parent has been used.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t seed, std::string_view label);

  RngStream derive(std::string_view label) const;
  RngStream derive(std::uint64_t index) const;

  std::uint64_t next_u64() noexcept;
  // [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Box-Muller over the next two uniforms; one normal per call.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  const std::string& path() const noexcept { return path_; }

 private:
  struct FromKey {};
  RngStream(FromKey, std::uint64_t key, std::string path);
  void expand() noexcept;

  std::uint64_t key_;
  std::string path_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace craft
