#pragma once

#include <cstdint>
#include <random>

namespace csc {

/// Independent random streams of one simulation run. Each stream gets its own
/// engine so that, e.g., changing the sensing noise level never shifts the
/// packet-loss draws.
enum class Stream : std::uint64_t {
  sensing = 1,
  loss = 2,
  delay = 3,
  snr = 4,
  validation = 5,
};

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for (master, run, stream). Pure function of its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run, Stream stream) noexcept
{
  return splitmix64(splitmix64(splitmix64(master) ^ run) ^ static_cast<std::uint64_t>(stream));
}

inline Engine make_engine(std::uint64_t master, std::uint64_t run, Stream stream)
{
  return Engine{derive_seed(master, run, stream)};
}

}  // namespace csc
