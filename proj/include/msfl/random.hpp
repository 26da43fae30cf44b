// Copyright 2026 The msfl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Counter-based random streams (Philox4x32-10) and the handful of
// distributions the simulator needs, written out so that the sequence of
// draws does not depend on the standard library implementation.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace msfl::random {

class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter bijection(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  /// One stream per (seed, stream words). Word 0 of the counter is the
  /// position within the stream.
  Philox4x32(std::uint64_t seed, std::uint32_t s1, std::uint32_t s2, std::uint32_t s3)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, s1, s2, s3} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 4) {
      block_ = bijection(ctr_, key_);
      if (++ctr_[0] == 0) throw std::overflow_error("Philox stream exhausted");
      used_ = 0;
    }
    return block_[used_++];
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

  Key key_;
  Counter ctr_;
  Counter block_{};
  int used_ = 4;
};

/// Uniform on the open interval (0, 1) with 53 bits of resolution.
template <class Engine>
double uniform01(Engine& g) {
  const std::uint64_t hi = g();
  const std::uint64_t lo = g();
  const std::uint64_t bits = ((hi << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

template <class Engine>
double uniform(Engine& g, double a, double b) {
  return a + (b - a) * uniform01(g);
}

template <class Engine>
bool bernoulli(Engine& g, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(g) < p;
}

/// Poisson by sequential inversion; intended for means up to a few tens.
template <class Engine>
std::uint32_t poisson(Engine& g, double mean) {
  if (mean <= 0.0) return 0;
  double u = uniform01(g);
  double p = std::exp(-mean);
  std::uint32_t k = 0;
  while (u > p) {
    u -= p;
    ++k;
    p *= mean / k;
    if (p == 0.0) break;  // tail underflow: remaining mass is below 1 ulp
  }
  return k;
}

/// Poisson conditioned on at least one event.
template <class Engine>
std::uint32_t poisson_nonzero(Engine& g, double mean) {
  if (mean <= 0.0) throw std::domain_error("poisson_nonzero needs a positive mean");
  if (mean > 1.0) {
    for (;;) {
      const auto k = poisson(g, mean);
      if (k > 0) return k;
    }
  }
  // P(k | k >= 1) = e^-m m^k / k! / (1 - e^-m)
  const double norm = -std::expm1(-mean);
  double u = uniform01(g) * norm;
  double p = std::exp(-mean) * mean;
  std::uint32_t k = 1;
  while (u > p) {
    u -= p;
    ++k;
    p *= mean / k;
    if (p == 0.0) break;
  }
  return k;
}

/// Failures before the first success for a per-trial success probability
/// 1 - exp(log_q). Returns uint64 max when success is impossible.
template <class Engine>
std::uint64_t geometric_failures(Engine& g, double log_q) {
  if (log_q >= 0.0) return std::numeric_limits<std::uint64_t>::max();
  if (log_q == -std::numeric_limits<double>::infinity()) return 0;
  const double n = std::floor(std::log(uniform01(g)) / log_q);
  if (n >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(n);
}

template <class Engine>
double standard_normal(Engine& g) {
  const double u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace msfl::random
