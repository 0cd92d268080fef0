// Copyright 2026 The pqlearn Authors
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

#pragma once

#include <cstdint>
#include <random>

namespace pqlearn {

/// SplitMix64 finalizer. Used for every seed derivation in the library.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `base`:
///   derive_seed(base, index) = mix64(base ^ mix64(index)).
/// Distinct (base, index) pairs give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::uint64_t index) noexcept {
  return mix64(base ^ mix64(index));
}

/// Stream purposes. Each random consumer gets its own child stream so adding
/// draws to one purpose never shifts another.
enum class Stream : std::uint64_t {
  kGenerator = 1,
  kSampling = 2,
  kInit = 3,
};

/// Portable random source.
///
/// std::mt19937_64 is fully specified by the standard, but the std::
/// distributions are not, so all variates here are computed from raw engine
/// output. Results are bit-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Rng(std::uint64_t seed, Stream purpose)
      : engine_(derive_seed(seed, static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer on [0, n) by rejection. n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pqlearn
