//
// Copyright 2026 The Attackscope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef ATTACKSCOPE_RNG_H_
#define ATTACKSCOPE_RNG_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace attackscope {

using Rng = std::mt19937_64;

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t StableHash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Mixes a base seed with string keys into an independent stream seed.
inline std::uint64_t DeriveSeed(std::uint64_t seed, std::initializer_list<std::string_view> keys) {
  std::uint64_t h = seed ^ 0x9E3779B97F4A7C15ULL;
  for (std::string_view key : keys) {
    h ^= StableHash(key) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  }
  // splitmix64 finalizer
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

// Uniform integer in [0, n). Avoids std::uniform_int_distribution so draws do
// not depend on the standard library implementation.
inline std::size_t UniformIndex(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// Uniform real in [0, 1).
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller.
inline double StandardNormal(Rng& rng) {
  double u1 = UniformUnit(rng);
  while (u1 <= 0.0) u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace attackscope

#endif  // ATTACKSCOPE_RNG_H_
