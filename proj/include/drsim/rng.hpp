// Copyright 2026 The drsim Authors.
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

// Counter-based random numbers. Every draw is a pure function of
// (seed, replicate, stream, counter), so replicates can be produced in any
// order or in parallel and still be bit-identical.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace drsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  kCovariates = 1,
  kOutcomeNoise = 2,
  kResponse = 3,
};

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t replicate, Stream stream)
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ replicate) ^
                        static_cast<std::uint64_t>(stream))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(splitmix64(key_ ^ counter) + key_);
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Draws 2k and 2k+1 share a uniform pair
  // and use the cosine and sine branches respectively.
  double normal(std::uint64_t index) const {
    const std::uint64_t pair = index & ~std::uint64_t{1};
    const double radius = std::sqrt(-2.0 * std::log(uniform(pair)));
    const double angle = 2.0 * std::numbers::pi * uniform(pair + 1);
    return (index & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace drsim
