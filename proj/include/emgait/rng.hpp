#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace emgait {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `base`:
///   derive_seed(base, i) = splitmix64(splitmix64(base) ^ (i * 0xD1B54A32D192ED03)).
/// Used for trial seeds, per-tree seeds, search candidates and dropout streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(base) ^ (index * 0xD1B54A32D192ED03ull));
}

/// Named sub-streams so call sites do not collide on small integers.
namespace stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t search = 2;
inline constexpr std::uint64_t fit = 3;
inline constexpr std::uint64_t dcnn = 4;
inline constexpr std::uint64_t val_split = 5;
inline constexpr std::uint64_t synthetic = 6;
}  // namespace stream

/// 64-bit FNV-1a, rendered as 16 hex digits by `hex_digest`.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ull) noexcept;
std::string hex_digest(std::uint64_t h);

}  // namespace emgait
