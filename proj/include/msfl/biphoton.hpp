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

// Two-photon state algebra over the four path labels (two loop polarizations,
// two PBS2 output ports) for one signal and one idler photon.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "msfl/polarization.hpp"

namespace msfl {

enum class Path : std::uint8_t { LoopH = 0, LoopV = 1, PortA = 2, PortB = 3 };
enum class Band : std::uint8_t { Signal, Idler };

inline constexpr std::size_t kPathCount = 4;

struct ModeLabel {
  Path path;
  Band band;
  friend bool operator==(const ModeLabel&, const ModeLabel&) = default;
};

inline constexpr std::size_t index(Path p) { return static_cast<std::size_t>(p); }

/// Single-photon operator on the path basis.
using ModeOperator = Eigen::Matrix4cd;

/// Embeds a polarization operator on the loop labels; identity on the ports.
inline ModeOperator on_loop(const Matrix2& u) {
  ModeOperator m = ModeOperator::Identity();
  m.block<2, 2>(0, 0) = u;
  return m;
}

/// PBS2 routing: H leaves through port a, V through port b. Written as a
/// permutation so it stays unitary on the full four-label basis.
inline ModeOperator pbs_routing() {
  ModeOperator m = ModeOperator::Zero();
  m(index(Path::PortA), index(Path::LoopH)) = 1.0;
  m(index(Path::PortB), index(Path::LoopV)) = 1.0;
  m(index(Path::LoopH), index(Path::PortA)) = 1.0;
  m(index(Path::LoopV), index(Path::PortB)) = 1.0;
  return m;
}

enum class Photon { Signal, Idler, Both };

class TwoPhotonState {
 public:
  /// Rows index the signal photon's path, columns the idler's.
  using Amplitudes = Eigen::Matrix4cd;

  static TwoPhotonState basis(Path signal, Path idler) {
    Amplitudes a = Amplitudes::Zero();
    a(index(signal), index(idler)) = 1.0;
    return TwoPhotonState(a);
  }

  /// Throws if the amplitudes are not normalized within 1e-12.
  static TwoPhotonState from_amplitudes(const Amplitudes& a) {
    const double n = a.squaredNorm();
    if (std::abs(n - 1.0) > 1e-12)
      throw std::invalid_argument(fmt::format("two-photon state norm {} != 1", n));
    return TwoPhotonState(a);
  }

  const Amplitudes& amplitudes() const { return amp_; }
  Complex amplitude(Path signal, Path idler) const { return amp_(index(signal), index(idler)); }

  Complex amplitude(ModeLabel signal, ModeLabel idler) const {
    if (signal.band != Band::Signal || idler.band != Band::Idler)
      throw std::invalid_argument("signal/idler mode labels carry the wrong band");
    return amplitude(signal.path, idler.path);
  }

  double probability(Path signal, Path idler) const { return std::norm(amplitude(signal, idler)); }
  double norm2() const { return amp_.squaredNorm(); }

  /// <this|other>
  Complex inner(const TwoPhotonState& other) const {
    return (amp_.conjugate().cwiseProduct(other.amp_)).sum();
  }

  /// Overlap probability |<this|other>|^2.
  double overlap(const TwoPhotonState& other) const { return std::norm(inner(other)); }

 private:
  friend TwoPhotonState apply_single_photon_unitary(const TwoPhotonState&, Photon,
                                                    const ModeOperator&);
  explicit TwoPhotonState(const Amplitudes& a) : amp_(a) {}
  Amplitudes amp_;
};

/// Applies `u` to one or both photons (tensor-product action).
inline TwoPhotonState apply_single_photon_unitary(const TwoPhotonState& state, Photon which,
                                                  const ModeOperator& u) {
  if (!is_unitary(u, 1e-12)) throw std::invalid_argument("mode operator is not unitary");
  const auto& a = state.amplitudes();
  switch (which) {
    case Photon::Signal:
      return TwoPhotonState(u * a);
    case Photon::Idler:
      return TwoPhotonState(a * u.transpose());
    case Photon::Both:
      return TwoPhotonState(u * a * u.transpose());
  }
  throw std::logic_error("unreachable");
}

inline TwoPhotonState apply_single_photon_unitary(const TwoPhotonState& state, Photon which,
                                                  const Matrix2& u) {
  if (!is_unitary(u, 1e-12)) throw std::invalid_argument("polarization operator is not unitary");
  return apply_single_photon_unitary(state, which, on_loop(u));
}

/// Componentwise comparison modulo one global phase. Each state is rotated so
/// that its largest-magnitude amplitude is real and positive.
inline bool equal_up_to_global_phase(const TwoPhotonState& x, const TwoPhotonState& y,
                                     double tol = 1e-12) {
  auto aligned = [](const TwoPhotonState::Amplitudes& a) {
    Eigen::Index r = 0, c = 0;
    a.cwiseAbs().maxCoeff(&r, &c);
    const Complex ref = a(r, c);
    if (std::abs(ref) == 0.0) return TwoPhotonState::Amplitudes(a);
    return TwoPhotonState::Amplitudes(a * (std::abs(ref) / ref));
  };
  return (aligned(x.amplitudes()) - aligned(y.amplitudes())).cwiseAbs().maxCoeff() <= tol;
}

/// (|s_a i_a> + |s_b i_b>)/sqrt2
inline TwoPhotonState bunched_state() {
  TwoPhotonState::Amplitudes a = TwoPhotonState::Amplitudes::Zero();
  a(index(Path::PortA), index(Path::PortA)) = std::numbers::sqrt2 / 2;
  a(index(Path::PortB), index(Path::PortB)) = std::numbers::sqrt2 / 2;
  return TwoPhotonState::from_amplitudes(a);
}

/// (|s_a i_b> + |s_b i_a>)/sqrt2
inline TwoPhotonState antibunched_state() {
  TwoPhotonState::Amplitudes a = TwoPhotonState::Amplitudes::Zero();
  a(index(Path::PortA), index(Path::PortB)) = std::numbers::sqrt2 / 2;
  a(index(Path::PortB), index(Path::PortA)) = std::numbers::sqrt2 / 2;
  return TwoPhotonState::from_amplitudes(a);
}

/// Pair state leaving the loop PBS: the H term from one propagation direction
/// and the V term from the other, which carries twice the pump phase.
inline TwoPhotonState msfl_source_state(double phi_p) {
  TwoPhotonState::Amplitudes a = TwoPhotonState::Amplitudes::Zero();
  const double r = std::numbers::sqrt2 / 2;
  a(index(Path::LoopH), index(Path::LoopH)) = r;
  a(index(Path::LoopV), index(Path::LoopV)) = r * std::polar(1.0, 2.0 * phi_p);
  return TwoPhotonState::from_amplitudes(a);
}

/// Source state through HWP1 (22.5 deg) on both photons, then PBS2 routing.
inline TwoPhotonState pbs2_output(double phi_p) {
  auto s = apply_single_photon_unitary(msfl_source_state(phi_p), Photon::Both, hwp(22.5));
  return apply_single_photon_unitary(s, Photon::Both, pbs_routing());
}

struct OutputProbabilities {
  double bunched;
  double antibunched;
};

inline OutputProbabilities output_probabilities(double phi_p) {
  const double bunched = 0.5 * (1.0 + std::cos(2.0 * phi_p));
  return {bunched, 1.0 - bunched};
}

/// Delay-line and filter parameters of the beating measurement. Frequencies
/// in Hz, `sigma` is the angular filter bandwidth in rad/s.
struct SpectralConfig {
  double nu_signal = 192.70e12;
  double nu_idler = 193.50e12;
  double sigma = 2.0 * std::numbers::pi * 32.0e9;

  double spacing() const { return std::abs(nu_idler - nu_signal); }
  double beat_angular_frequency() const { return 2.0 * std::numbers::pi * spacing(); }
  double beat_period() const { return 1.0 / spacing(); }

  void validate() const {
    Checker c;
    c.require(std::isfinite(nu_signal) && nu_signal > 0.0, "spectral nu_signal must be > 0");
    c.require(std::isfinite(nu_idler) && nu_idler > 0.0, "spectral nu_idler must be > 0");
    c.require(spacing() > 0.0, "spectral spacing must be > 0 (non-degenerate bands)");
    c.require(std::isfinite(sigma) && sigma > 0.0, "spectral sigma must be > 0");
    c.throw_if_failed();
  }
};

/// Unnormalized sin(x)/x with sinc(0) = 1.
inline double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

/// Normalized coincidence 1 - v0 sinc(sigma dt) cos(2 pi spacing dt).
inline double beating_probability(double delay_s, double v0, const SpectralConfig& spectral) {
  if (!(v0 >= 0.0 && v0 <= 1.0))
    throw std::domain_error(fmt::format("beating visibility must lie in [0, 1], got {}", v0));
  return 1.0 - v0 * sinc(spectral.sigma * delay_s) *
                   std::cos(spectral.beat_angular_frequency() * delay_s);
}

}  // namespace msfl
