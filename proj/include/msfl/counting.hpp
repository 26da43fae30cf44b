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

// Seeded Monte Carlo of pulsed pair generation, loss, noise photons and gated
// threshold detection, producing singles/coincidence records per setting.
//
// Each run is split into fixed-size pulse blocks. Block b of setting s draws
// from its own Philox stream (seed, b, s, tag), so counts are identical for
// any number of worker threads. Inside a block, empty pulses are skipped with
// an exact geometric gap and the first non-empty component of the next
// active pulse is drawn conditionally on being non-zero.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "msfl/biphoton.hpp"
#include "msfl/diagnostics.hpp"
#include "msfl/parallel.hpp"
#include "msfl/random.hpp"

namespace msfl {

inline constexpr double kMaxPairsPerPulse = 0.1;  // single-pair regime
inline constexpr double kMaxNoisePerPulse = 50.0;

struct SourceConfig {
  double mu = 0.01;           // mean pairs per pulse
  double noise_signal = 0.0;  // mean uncorrelated photons per pulse, signal band
  double noise_idler = 0.0;
  double phi_p = std::numbers::pi / 2;

  std::vector<std::string> check() const {
    Checker c;
    c.require(std::isfinite(mu) && mu >= 0.0, "source mu must be >= 0");
    c.require(!(mu >= kMaxPairsPerPulse), "source mu must be < 0.1 (single-pair regime)");
    c.require(std::isfinite(noise_signal) && noise_signal >= 0.0 && noise_signal <= kMaxNoisePerPulse,
              "source noise_signal must lie in [0, 50]");
    c.require(std::isfinite(noise_idler) && noise_idler >= 0.0 && noise_idler <= kMaxNoisePerPulse,
              "source noise_idler must lie in [0, 50]");
    c.require(std::isfinite(phi_p), "source phi_p must be finite");
    return c.failures();
  }
  void validate() const { Checker c; c.merge(check()); c.throw_if_failed(); }
};

struct DetectorConfig {
  double efficiency = 0.218;
  double dark_prob = 5.82e-5;  // per gate
  double gate_window_ns = 2.5;

  std::vector<std::string> check(std::string_view name = "detector") const {
    Checker c;
    c.require(efficiency >= 0.0 && efficiency <= 1.0, fmt::format("{} efficiency must lie in [0, 1]", name));
    c.require(dark_prob >= 0.0 && dark_prob < 1.0, fmt::format("{} dark_prob must lie in [0, 1)", name));
    c.require(std::isfinite(gate_window_ns) && gate_window_ns > 0.0,
              fmt::format("{} gate_window must be > 0", name));
    return c.failures();
  }
};

using DetectorPair = std::array<DetectorConfig, 2>;

/// SPD1 / SPD2 of the setup.
inline DetectorPair default_detectors() {
  return {DetectorConfig{0.218, 5.82e-5, 2.5}, DetectorConfig{0.226, 4.60e-5, 2.5}};
}

struct ChannelConfig {
  double insertion_loss_db = 0.8;  // per filtering/splitting module
  double extra_loss_db = 0.0;      // couplers, delay line

  double transmission() const { return std::pow(10.0, -(insertion_loss_db + extra_loss_db) / 10.0); }

  std::vector<std::string> check() const {
    Checker c;
    c.require(std::isfinite(insertion_loss_db) && insertion_loss_db >= 0.0, "channel insertion_loss must be >= 0");
    c.require(std::isfinite(extra_loss_db) && extra_loss_db >= 0.0, "channel extra_loss must be >= 0");
    return c.failures();
  }
};

struct CountsRecord {
  std::uint64_t pulses = 0;
  std::uint64_t singles_1 = 0;
  std::uint64_t singles_2 = 0;
  std::uint64_t coincidences = 0;
  double accidentals_est = 0.0;
  std::string setting;

  friend bool operator==(const CountsRecord&, const CountsRecord&) = default;
};

/// Detector placement on the PBS2 filter outputs. D/E carry signal/idler
/// from port a, F/G signal/idler from port b. The first letter is SPD1.
enum class PortPair { DE, FG, DG, EF };

inline PortPair parse_port_pair(std::string_view s) {
  if (s == "DE") return PortPair::DE;
  if (s == "FG") return PortPair::FG;
  if (s == "DG") return PortPair::DG;
  if (s == "EF") return PortPair::EF;
  throw std::invalid_argument(fmt::format("unknown port pair '{}' (expected DE|FG|DG|EF)", s));
}

inline std::string_view to_string(PortPair p) {
  switch (p) {
    case PortPair::DE: return "DE";
    case PortPair::FG: return "FG";
    case PortPair::DG: return "DG";
    case PortPair::EF: return "EF";
  }
  return "?";
}

struct SimOptions {
  unsigned workers = 1;
  std::uint32_t setting_index = 0;  // selects an independent stream family per scan point
};

inline constexpr std::uint64_t kBlockPulses = std::uint64_t{1} << 18;

/// Uncorrelated-coincidence estimate singles_1 * singles_2 / pulses.
inline double estimate_accidentals(const CountsRecord& r) {
  if (r.pulses == 0) throw std::invalid_argument("cannot estimate accidentals from zero pulses");
  return static_cast<double>(r.singles_1) * static_cast<double>(r.singles_2) / static_cast<double>(r.pulses);
}

namespace detail {

struct PulseDraw {
  std::uint32_t pairs = 0;
  std::uint32_t noise_signal = 0;
  std::uint32_t noise_idler = 0;
  bool dark1 = false;
  bool dark2 = false;
};

/// Samples pulses conditioned on at least one of (pairs, signal noise, idler
/// noise, dark 1, dark 2) being non-zero.
class PulseSampler {
 public:
  PulseSampler(double mu, double noise_signal, double noise_idler, double dark1, double dark2)
      : means_{mu, noise_signal, noise_idler}, dark_{dark1, dark2} {
    const std::array<double, 5> log_zero = {-mu, -noise_signal, -noise_idler, std::log1p(-dark1),
                                            std::log1p(-dark2)};
    const std::array<double, 5> nonzero = {-std::expm1(-mu), -std::expm1(-noise_signal),
                                           -std::expm1(-noise_idler), dark1, dark2};
    double log_prefix = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      acc += std::exp(log_prefix) * nonzero[k];
      first_cdf_[k] = acc;
      log_prefix += log_zero[k];
    }
    log_empty_ = log_prefix;
  }

  double log_empty() const { return log_empty_; }

  template <class G>
  PulseDraw draw_active(G& g) const {
    const double u = random::uniform01(g) * first_cdf_[4];
    std::size_t first = 0;
    while (first < 4 && u >= first_cdf_[first]) ++first;

    PulseDraw d;
    auto count = [&](std::size_t k) -> std::uint32_t {
      if (k < first) return 0;
      if (k == first) return random::poisson_nonzero(g, means_[k]);
      return random::poisson(g, means_[k]);
    };
    auto click = [&](std::size_t k) -> bool {
      if (k < first) return false;
      if (k == first) return true;
      return random::bernoulli(g, dark_[k - 3]);
    };
    d.pairs = count(0);
    d.noise_signal = count(1);
    d.noise_idler = count(2);
    d.dark1 = click(3);
    d.dark2 = click(4);
    return d;
  }

 private:
  std::array<double, 3> means_;
  std::array<double, 2> dark_;
  std::array<double, 5> first_cdf_{};
  double log_empty_ = 0.0;
};

struct Tally {
  std::uint64_t singles_1 = 0;
  std::uint64_t singles_2 = 0;
  std::uint64_t coincidences = 0;
};

/// Drives `resolve(draw, rng) -> pair<bool, bool>` over every active pulse.
template <class Resolve>
CountsRecord run_pulses(const PulseSampler& sampler, const Resolve& resolve, std::uint64_t n_pulses,
                        std::uint64_t seed, std::uint32_t setting_index, std::uint32_t tag,
                        unsigned workers) {
  if (n_pulses == 0) throw std::invalid_argument("n_pulses must be >= 1");
  const std::uint64_t blocks = (n_pulses + kBlockPulses - 1) / kBlockPulses;
  if (blocks > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("too many pulses");
  std::vector<Tally> tallies(blocks);
  const double log_empty = sampler.log_empty();

  parallel_for(blocks, workers, [&](std::size_t b) {
    random::Philox4x32 rng(seed, static_cast<std::uint32_t>(b), setting_index, tag);
    const std::uint64_t len = std::min(kBlockPulses, n_pulses - b * kBlockPulses);
    Tally t;
    std::uint64_t pos = 0;
    for (;;) {
      const std::uint64_t gap = random::geometric_failures(rng, log_empty);
      if (gap >= len - pos) break;
      pos += gap;
      const auto [fire1, fire2] = resolve(sampler.draw_active(rng), rng);
      t.singles_1 += fire1;
      t.singles_2 += fire2;
      t.coincidences += (fire1 && fire2);
      ++pos;
    }
    tallies[b] = t;
  });

  CountsRecord r;
  r.pulses = n_pulses;
  for (const auto& t : tallies) {
    r.singles_1 += t.singles_1;
    r.singles_2 += t.singles_2;
    r.coincidences += t.coincidences;
  }
  r.accidentals_est = estimate_accidentals(r);
  return r;
}

enum class Port : std::uint8_t { D, E, F, G, None };

inline std::pair<Port, Port> detector_ports(PortPair p) {
  switch (p) {
    case PortPair::DE: return {Port::D, Port::E};
    case PortPair::FG: return {Port::F, Port::G};
    case PortPair::DG: return {Port::D, Port::G};
    case PortPair::EF: return {Port::E, Port::F};
  }
  throw std::invalid_argument("unknown port pair");
}

inline void validate_run(const SourceConfig& source, const DetectorPair& detectors,
                         const ChannelConfig& channels, std::uint64_t n_pulses) {
  Checker c;
  c.merge(source.check());
  c.merge(detectors[0].check("detector 1"));
  c.merge(detectors[1].check("detector 2"));
  c.merge(channels.check());
  c.require(n_pulses >= 1, "n_pulses must be >= 1");
  c.throw_if_failed();
}

}  // namespace detail

/// Coincidences between two of the four filtered PBS2 outputs at a fixed pump
/// phase. Pair routing follows |amplitude|^2 of pbs2_output(phi_p).
inline CountsRecord simulate_tpi_setting(const SourceConfig& source, const DetectorPair& detectors,
                                         const ChannelConfig& channels, PortPair port_pair,
                                         std::uint64_t n_pulses, std::uint64_t seed,
                                         const SimOptions& options = {}) {
  detail::validate_run(source, detectors, channels, n_pulses);
  using detail::Port;
  const auto [port1, port2] = detail::detector_ports(port_pair);
  const double t = channels.transmission();
  const double q1 = detectors[0].efficiency * t;
  const double q2 = detectors[1].efficiency * t;

  // Branch order: (a,a), (a,b), (b,a), (b,b) for (signal, idler).
  const TwoPhotonState out = pbs2_output(source.phi_p);
  std::array<double, 4> branch_cdf{};
  {
    const std::array<double, 4> p = {out.probability(Path::PortA, Path::PortA),
                                     out.probability(Path::PortA, Path::PortB),
                                     out.probability(Path::PortB, Path::PortA),
                                     out.probability(Path::PortB, Path::PortB)};
    double acc = 0.0;
    for (std::size_t k = 0; k < 4; ++k) branch_cdf[k] = (acc += p[k]);
  }

  auto resolve = [&](const detail::PulseDraw& d, random::Philox4x32& g) {
    bool f1 = d.dark1;
    bool f2 = d.dark2;
    auto arrive = [&](Port p) {
      if (p == port1) {
        if (!f1) f1 = random::bernoulli(g, q1);
      } else if (p == port2) {
        if (!f2) f2 = random::bernoulli(g, q2);
      }
    };
    for (std::uint32_t k = 0; k < d.pairs; ++k) {
      const double u = random::uniform01(g) * branch_cdf[3];
      std::size_t b = 0;
      while (b < 3 && u >= branch_cdf[b]) ++b;
      const bool signal_a = b < 2;
      const bool idler_a = (b == 0 || b == 2);
      arrive(signal_a ? Port::D : Port::F);
      arrive(idler_a ? Port::E : Port::G);
    }
    for (std::uint32_t k = 0; k < d.noise_signal; ++k) arrive(random::bernoulli(g, 0.5) ? Port::D : Port::F);
    for (std::uint32_t k = 0; k < d.noise_idler; ++k) arrive(random::bernoulli(g, 0.5) ? Port::E : Port::G);
    return std::pair{f1, f2};
  };

  const detail::PulseSampler sampler(source.mu, source.noise_signal, source.noise_idler,
                                     detectors[0].dark_prob, detectors[1].dark_prob);
  CountsRecord r = detail::run_pulses(sampler, resolve, n_pulses, seed, options.setting_index,
                                      0x100u + static_cast<std::uint32_t>(port_pair), options.workers);
  r.setting = fmt::format("{:.9g}", source.phi_p);
  return r;
}

/// Coincidences between the signal-filtered and idler-filtered outputs of a
/// 50/50 coupler fed by PBS2 ports a and b with relative delay `delay_s`.
/// Each anti-bunched pair carries a difference-frequency detuning drawn
/// uniformly from [-sigma, sigma].
inline CountsRecord simulate_beating_setting(const SourceConfig& source, const DetectorPair& detectors,
                                             const ChannelConfig& channels, double delay_s,
                                             const SpectralConfig& spectral, std::uint64_t n_pulses,
                                             std::uint64_t seed, const SimOptions& options = {}) {
  detail::validate_run(source, detectors, channels, n_pulses);
  spectral.validate();
  if (!std::isfinite(delay_s)) throw std::invalid_argument("delay must be finite");

  const double p_antibunched = output_probabilities(source.phi_p).antibunched;
  if (p_antibunched < 0.999)
    warn(fmt::format("beating input is not anti-bunched (p_ab = {:.6f}); phi_p should be near pi/2",
                     p_antibunched));

  const double t = channels.transmission();
  const double q1 = detectors[0].efficiency * t;
  const double q2 = detectors[1].efficiency * t;
  const double omega = spectral.beat_angular_frequency();
  const double sigma = spectral.sigma;

  // SPD1 sits behind the signal filter on coupler output 1, SPD2 behind the
  // idler filter on output 2.
  auto resolve = [&](const detail::PulseDraw& d, random::Philox4x32& g) {
    bool f1 = d.dark1;
    bool f2 = d.dark2;
    for (std::uint32_t k = 0; k < d.pairs; ++k) {
      const bool signal_out1 = random::bernoulli(g, 0.5);
      bool idler_out2;
      if (random::uniform01(g) < p_antibunched) {
        const double detuning = random::uniform(g, -sigma, sigma);
        const double c = std::cos((omega + detuning) * delay_s);
        // P(idler leaves the other output | signal output) = (1 - c)/2
        const bool opposite = random::bernoulli(g, 0.5 * (1.0 - c));
        idler_out2 = signal_out1 ? opposite : !opposite;
      } else {
        idler_out2 = random::bernoulli(g, 0.5);
      }
      if (signal_out1 && !f1) f1 = random::bernoulli(g, q1);
      if (idler_out2 && !f2) f2 = random::bernoulli(g, q2);
    }
    for (std::uint32_t k = 0; k < d.noise_signal; ++k)
      if (random::bernoulli(g, 0.5) && !f1) f1 = random::bernoulli(g, q1);
    for (std::uint32_t k = 0; k < d.noise_idler; ++k)
      if (random::bernoulli(g, 0.5) && !f2) f2 = random::bernoulli(g, q2);
    return std::pair{f1, f2};
  };

  const detail::PulseSampler sampler(source.mu, source.noise_signal, source.noise_idler,
                                     detectors[0].dark_prob, detectors[1].dark_prob);
  CountsRecord r = detail::run_pulses(sampler, resolve, n_pulses, seed, options.setting_index, 0x200u,
                                      options.workers);
  r.setting = fmt::format("{:.9g}", delay_s * 1e12);
  return r;
}

}  // namespace msfl
