#include "craft/rng.hpp"

#include <cmath>
#include <numbers>

namespace craft {
namespace {

std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fold(std::uint64_t key, std::string_view label) noexcept {
  std::uint64_t x = key ^ fnv1a(label);
  return splitmix64(x);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed) : key_(seed), path_(std::to_string(seed)) { expand(); }

RngStream::RngStream(std::uint64_t seed, std::string_view label) : RngStream(RngStream(seed).derive(label)) {}

RngStream::RngStream(FromKey, std::uint64_t key, std::string path) : key_(key), path_(std::move(path)) { expand(); }

RngStream RngStream::derive(std::string_view label) const {
  return RngStream(FromKey{}, fold(key_, label), path_ + "/" + std::string(label));
}

RngStream RngStream::derive(std::uint64_t index) const { return derive(std::to_string(index)); }

void RngStream::expand() noexcept {
  std::uint64_t sm = key_;
  for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() noexcept {
  // xoshiro256**
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double RngStream::normal() noexcept {
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless method with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace craft
