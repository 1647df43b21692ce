#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vocseg::rng {

// splitmix64, used to derive independent stream seeds from (seed, tag) pairs.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

inline uint64_t hash_name(std::string_view name) {
  // FNV-1a
  uint64_t h = 1469598103934665603ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic stream: one mt19937_64 per logical consumer, seeded by
// mixing the global seed with a tag so streams are order-independent.
class Stream {
 public:
  explicit Stream(uint64_t seed) : gen_(seed) {}
  Stream(uint64_t seed, std::string_view tag) : gen_(mix(seed, hash_name(tag))) {}
  Stream(uint64_t seed, uint64_t tag) : gen_(mix(seed, tag)) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }
  int64_t integer(int64_t lo, int64_t hi) {  // inclusive bounds
    return std::uniform_int_distribution<int64_t>(lo, hi)(gen_);
  }
  std::mt19937_64& gen() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace vocseg::rng
