#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>

namespace steinrec {

inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds a master seed and a path of identifiers into a stream key.
inline std::uint64_t derive_key(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t k = splitmix64(master);
  for (std::uint64_t id : path) k = splitmix64(k ^ splitmix64(id + 0x632BE59BD9B4E019ULL));
  return k;
}

/// Counter-based stream: the i-th output is a pure function of (key, i), so
/// any draw can be regenerated without replaying the ones before it.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}
  CounterStream(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept
      : key_(derive_key(master, path)) {}

  std::uint64_t next_u64() noexcept { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::size_t>((static_cast<u128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream identifiers shared by the samplers.
enum class StreamDomain : std::uint64_t {
  pool = 1,
  pairing = 2,
  coupled = 3,
  beta = 4,
  perturbation_moments = 5,
};

/// Runs body(begin, end) over [0, n) split into contiguous chunks on up to
/// `threads` workers. Callers must make each index's work independent of the
/// chunking.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace steinrec
