// Copyright 2026 The dnest Authors
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

// Random number plumbing.
//
// Two flavors are used throughout the library:
//
//  * Counter-based streams (`CounterStream`) for anything that is drawn per
//    trial: treatment bits, outcome noise, rider acceptance coins. The value
//    at counter `i` is a pure function of (seed, stream tag, trial, i), so a
//    trial's draws never depend on how many trials ran before it or on which
//    thread evaluated it.
//
//  * A sequential engine (`Engine`, std::mt19937_64) for one-shot
//    construction work such as graph generators. We only consume its raw
//    64-bit output and do the conversions ourselves, so results are identical
//    across standard library implementations.

#ifndef DNEST_RNG_HPP_
#define DNEST_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dnest::rng {

using Engine = std::mt19937_64;

// Stream tags keep the per-trial randomness of different purposes disjoint.
enum class Stream : std::uint64_t {
  kTreatment = 0x1001,
  kNoise = 0x2002,
  kAcceptance = 0x3003,
  kEyeballs = 0x4004,
  kFleet = 0x5005,
  kSampling = 0x6006,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x632BE59BD9B4E019ULL + (a << 6) + (a >> 2)));
}

// Maps 64 random bits to a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class CounterStream {
 public:
  constexpr CounterStream(std::uint64_t seed, Stream stream, std::uint64_t trial = 0)
      : key_(mix(mix(splitmix64(seed), static_cast<std::uint64_t>(stream)), trial)) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const { return mix(key_, counter); }

  // Uniform on [0, 1).
  constexpr double uniform(std::uint64_t counter) const { return to_unit(bits(counter)); }

  bool bernoulli(std::uint64_t counter, double p) const { return uniform(counter) < p; }

  // Standard normal via Box-Muller over the counter pair (2i, 2i+1).
  double normal(std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

inline Engine make_engine(std::uint64_t seed) { return Engine(splitmix64(seed)); }

inline double uniform01(Engine& engine) { return to_unit(engine()); }

// Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
inline std::uint64_t bounded(Engine& engine, std::uint64_t bound) {
  __uint128_t m = static_cast<__uint128_t>(engine()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<__uint128_t>(engine()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

template <typename It>
void shuffle(It first, It last, Engine& engine) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = bounded(engine, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace dnest::rng

#endif  // DNEST_RNG_HPP_
