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

// Jones calculus for the classical pump: elliptical states, half-wave plates,
// the polarizing-beam-splitter split into the two loop directions, and the
// extinction-ratio to phase mapping.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "msfl/diagnostics.hpp"

namespace msfl {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;

enum class Handedness { Right, Left };

/// Which extinction-ratio mapping to use. `Eq1` treats R_per/10 as the
/// exponent of the axis ratio, `Jones` uses the amplitude ratio R_per/20.
enum class PhaseMap { Eq1, Jones };

inline constexpr double kMaxExtinctionDb = 100.0;

inline std::string_view to_string(Handedness h) { return h == Handedness::Right ? "right" : "left"; }
inline std::string_view to_string(PhaseMap m) { return m == PhaseMap::Eq1 ? "eq1" : "jones"; }

inline Handedness parse_handedness(std::string_view s) {
  if (s == "right") return Handedness::Right;
  if (s == "left") return Handedness::Left;
  throw std::invalid_argument(fmt::format("unknown handedness '{}' (expected right|left)", s));
}

inline PhaseMap parse_phase_map(std::string_view s) {
  if (s == "eq1") return PhaseMap::Eq1;
  if (s == "jones") return PhaseMap::Jones;
  throw std::invalid_argument(fmt::format("unknown phase_map '{}' (expected eq1|jones)", s));
}

struct JonesVector {
  Complex h{1.0, 0.0};
  Complex v{0.0, 0.0};

  double norm2() const { return std::norm(h) + std::norm(v); }

  JonesVector normalized() const {
    const double n = std::sqrt(norm2());
    if (!(n > 0.0)) throw std::domain_error("cannot normalize a zero Jones vector");
    return {h / n, v / n};
  }

  Eigen::Vector2cd as_vector() const { return {h, v}; }
  static JonesVector from_vector(const Eigen::Vector2cd& x) { return {x(0), x(1)}; }
};

/// Validates an extinction ratio and clamps values above kMaxExtinctionDb.
inline double clamp_extinction(double r_per_db) {
  if (!std::isfinite(r_per_db) || r_per_db < 0.0)
    throw std::domain_error(fmt::format("extinction ratio must be finite and >= 0 dB, got {}", r_per_db));
  if (r_per_db > kMaxExtinctionDb) {
    warn(fmt::format("extinction ratio {} dB clamped to {} dB", r_per_db, kMaxExtinctionDb));
    return kMaxExtinctionDb;
  }
  return r_per_db;
}

/// Short-to-long axis amplitude ratio of the pump ellipse under `map`.
inline double axis_ratio(double r_per_db, PhaseMap map = PhaseMap::Eq1) {
  const double r = clamp_extinction(r_per_db);
  const double divisor = map == PhaseMap::Eq1 ? 10.0 : 20.0;
  return std::pow(10.0, -r / divisor);
}

/// Pump phase difference between the split H and V components,
/// +-2 atan(ratio) with + for right-handed light.
inline double phase_from_extinction(double r_per_db, Handedness handedness,
                                    PhaseMap map = PhaseMap::Eq1) {
  const double phi = 2.0 * std::atan(axis_ratio(r_per_db, map));
  return handedness == Handedness::Right ? phi : -phi;
}

/// Half-wave plate with fast axis at `theta_deg`, acting on (H, V):
/// [cos 2t, sin 2t; sin 2t, -cos 2t]. At 22.5 deg this maps V to (H - V)/sqrt2.
inline Matrix2 hwp(double theta_deg) {
  const double t = 2.0 * theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t);
  const double s = std::sin(t);
  Matrix2 m;
  m << c, s, s, -c;
  return m;
}

template <class Derived>
bool is_unitary(const Eigen::MatrixBase<Derived>& u, double tol = 1e-12) {
  if (u.rows() != u.cols()) return false;
  const auto id = Eigen::MatrixXcd::Identity(u.rows(), u.cols());
  return ((u.adjoint() * u).eval() - id).cwiseAbs().maxCoeff() <= tol;
}

struct PumpState {
  JonesVector jones;
  double center_wavelength_nm = 1552.52;
  double pulse_width_ps = 19.0;
  double rep_rate_hz = 4.0e6;
  double avg_power_uw = 12.6;  // metadata only
  double r_per_db = 0.0;
  Handedness handedness = Handedness::Right;
  PhaseMap phase_map = PhaseMap::Eq1;

  /// Elliptical pump with its long axis along V. The short axis (H) leads or
  /// lags by pi/2 depending on handedness.
  static PumpState from_extinction(double r_per_db, Handedness handedness,
                                   PhaseMap map = PhaseMap::Eq1) {
    PumpState p;
    p.r_per_db = clamp_extinction(r_per_db);
    p.handedness = handedness;
    p.phase_map = map;
    const double chi = std::atan(axis_ratio(p.r_per_db, map));
    const double sign = handedness == Handedness::Right ? 1.0 : -1.0;
    p.jones = {Complex(0.0, sign * std::sin(chi)), Complex(std::cos(chi), 0.0)};
    return p;
  }

  void validate() const {
    Checker c;
    c.require(std::isfinite(r_per_db) && r_per_db >= 0.0, "pump r_per must be finite and >= 0");
    c.require(std::abs(jones.norm2() - 1.0) <= 1e-12, "pump Jones vector must be normalized");
    c.require(std::abs(jones.v) >= std::abs(jones.h), "pump long axis must lie along V (|v| >= |h|)");
    if (std::abs(jones.h) > 1e-15) {
      const double rel = std::arg(jones.h / jones.v);
      c.require(std::abs(std::abs(rel) - std::numbers::pi / 2) <= 1e-9,
                "pump h/v relative phase must be +-pi/2");
    }
    c.throw_if_failed();
  }
};

struct PumpSplit {
  Complex cw;   // PBS-transmitted (H) component
  Complex ccw;  // PBS-reflected (V) component
  double phase_difference() const { return std::arg(cw * std::conj(ccw)); }
};

/// Pump after HWP1 at 22.5 deg and the loop PBS. The reflected port picks up
/// a -1, which absorbs the -cos(2t) sign of the plate so that a linear V pump
/// splits in phase.
inline PumpSplit pump_split(const PumpState& pump) {
  pump.validate();
  const Eigen::Vector2cd out = hwp(22.5) * pump.jones.as_vector();
  return {out(0), -out(1)};
}

}  // namespace msfl
