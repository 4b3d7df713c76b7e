/*
 * Copyright 2026 The tailsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace tailsim {

// Counter-based pseudo-random streams. Each (seed, label) pair names an
// independent substream; draws are addressed by index, so a value consumed by
// one subsystem can never shift the sequence seen by another. This is what
// keeps arrival times, fan-out choices and service demands identical across
// policies for the same seed.

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + kGolden + (a << 6) + (a >> 2)));
}

}  // namespace detail

/// A labeled, seeded random substream. Identical (label, seed) pairs yield
/// identical sequences; distinct labels are statistically independent.
class RngStream {
 public:
  RngStream() : base_(0) {}
  RngStream(std::uint64_t seed, std::string_view label)
      : base_(detail::mix(detail::splitmix64(seed), detail::fnv1a(label))) {}

  /// Derive a further substream (e.g. per leaf or per purpose).
  RngStream sub(std::string_view label) const {
    RngStream r;
    r.base_ = detail::mix(base_, detail::fnv1a(label));
    return r;
  }
  RngStream sub(std::uint64_t salt) const {
    RngStream r;
    r.base_ = detail::mix(base_, detail::splitmix64(salt));
    return r;
  }

  /// Random-access draw: the i-th value of the stream.
  std::uint64_t at(std::uint64_t index) const {
    return detail::splitmix64(base_ ^ (index * detail::kGolden));
  }

  /// Sequential draw (advances an internal counter).
  std::uint64_t next() { return at(counter_++); }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double u01_at(std::uint64_t index) const {
    return static_cast<double>(at(index) >> 11) * 0x1.0p-53;
  }
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + u01() * (hi - lo); }

  /// Exponential with the given mean.
  double expo(double mean) { return -mean * std::log1p(-u01()); }

  /// Standard normal (Box-Muller; consumes two draws).
  double normal() {
    double u1 = u01();
    double u2 = u01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  std::uint64_t state() const { return base_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// One-shot deterministic draw addressed by (seed, label, a, b). Used for
/// per-query, per-leaf values that must not depend on event interleaving.
inline std::uint64_t hash_draw(std::uint64_t seed, std::string_view label, std::uint64_t a,
                               std::uint64_t b = 0) {
  std::uint64_t h = detail::mix(detail::splitmix64(seed), detail::fnv1a(label));
  h = detail::mix(h, detail::splitmix64(a));
  if (b) h = detail::mix(h, detail::splitmix64(b));
  return detail::splitmix64(h);
}

inline double hash_u01(std::uint64_t seed, std::string_view label, std::uint64_t a,
                       std::uint64_t b = 0) {
  return static_cast<double>(hash_draw(seed, label, a, b) >> 11) * 0x1.0p-53;
}

/// Two independent uniforms from one address, for Box-Muller style sampling.
inline double hash_normal(std::uint64_t seed, std::string_view label, std::uint64_t a,
                          std::uint64_t b = 0) {
  std::uint64_t h = hash_draw(seed, label, a, b);
  double u1 = static_cast<double>(h >> 11) * 0x1.0p-53;
  double u2 = static_cast<double>(detail::splitmix64(h) >> 11) * 0x1.0p-53;
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace tailsim
