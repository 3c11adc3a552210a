// Copyright 2026 The synqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>
#include <string_view>

#include <boost/math/special_functions/erf.hpp>

namespace synqp {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based random stream. A stream is a keyed function from a 64-bit
// counter to 64 random bits, so draw k of any stream can be computed without
// touching draws 0..k-1. Named child streams give every pipeline stage its
// own key, derived as hash(parent key, name).
class Stream {
 public:
  constexpr explicit Stream(std::uint64_t seed) noexcept
      : key_(splitmix64(seed ^ 0x5851F42D4C957F2DULL)) {}

  constexpr Stream child(std::string_view name) const noexcept {
    return Stream(key_, splitmix64(fnv1a64(name)));
  }
  constexpr Stream child(std::uint64_t index) const noexcept {
    return Stream(key_, splitmix64(index ^ 0xD1B54A32D192ED03ULL));
  }

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ + counter * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on [0, 1).
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1).
  constexpr double open_uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n); n > 0.
  constexpr std::uint64_t below(std::uint64_t counter,
                                std::uint64_t n) const noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  constexpr Stream(std::uint64_t parent, std::uint64_t salt) noexcept
      : key_(splitmix64(parent ^ salt)) {}

  std::uint64_t key_;
};

// Sequential reader over a window of a stream: draws counter, counter+1, ...
class StreamCursor {
 public:
  constexpr StreamCursor(const Stream& stream, std::uint64_t start) noexcept
      : stream_(stream), counter_(start) {}

  double uniform() noexcept { return stream_.uniform(counter_++); }
  double open_uniform() noexcept { return stream_.open_uniform(counter_++); }
  std::uint64_t below(std::uint64_t n) noexcept {
    return stream_.below(counter_++, n);
  }

 private:
  Stream stream_;
  std::uint64_t counter_;
};

// Smallest k with cum[k] > u over a cumulative probability vector; u past
// the (rounded) total maps to the last index with positive mass.
inline std::size_t inverse_cdf_index(const std::vector<double>& cum, double u) {
  auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  if (k < cum.size()) return k;
  k = cum.size() - 1;
  while (k > 0 && cum[k] == cum[k - 1]) --k;
  return k;
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

// Inverse of the standard normal CDF for p in (0, 1).
inline double normal_quantile(double p) {
  return -1.41421356237309504880 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace synqp
