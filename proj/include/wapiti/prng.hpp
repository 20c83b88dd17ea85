#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wapiti {

// SplitMix64 finalizer. All downstream randomness (green lists, AAR scores,
// sampling, attacks) is a pure function of a 64-bit seed through this mix,
// so generation and detection recompute identical values bit for bit.
inline uint64_t mix64(uint64_t x) {
  uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// i-th value of the uniform stream for a seed, in the open interval (0,1).
inline double uniform_at(uint64_t seed, uint64_t i) {
  double v = static_cast<double>(mix64(seed + i) >> 11) * 0x1.0p-53;
  return v == 0.0 ? 0x1.0p-53 : v;
}

inline std::vector<double> uniform_stream(uint64_t seed, size_t n) {
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = uniform_at(seed, i);
  return out;
}

// Fisher-Yates permutation of 0..n-1 driven by uniform_stream(seed, n):
// at step i from n-1 down to 1, swap with index floor(u_i * (i+1)).
inline std::vector<uint32_t> permutation(uint64_t seed, uint32_t n) {
  std::vector<uint32_t> p(n);
  for (uint32_t i = 0; i < n; ++i) p[i] = i;
  std::vector<double> u = uniform_stream(seed, n);
  for (uint32_t i = n - 1; i >= 1; --i) {
    auto j = static_cast<uint32_t>(u[i] * (i + 1));
    if (j > i) j = i;
    std::swap(p[i], p[j]);
  }
  return p;
}

// Seed for a watermark decision at one position: hash of key, scheme tag and
// the k preceding token ids in order. Ids are offset by one so BOS (id 0)
// still contributes entropy.
inline uint64_t context_seed(uint64_t key, uint64_t scheme_tag,
                             std::span<const uint32_t> ctx) {
  uint64_t s = mix64(key ^ scheme_tag);
  for (uint32_t t : ctx) s = mix64(s ^ (static_cast<uint64_t>(t) + 1));
  return s;
}

// Child seed derivation for independent sub-streams of one master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t salt) {
  return mix64(mix64(master) ^ salt);
}

inline constexpr uint64_t kKgwSchemeTag = 1;
inline constexpr uint64_t kAarSchemeTag = 2;

}  // namespace wapiti
