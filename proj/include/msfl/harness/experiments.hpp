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

// End-to-end scans: two-photon-interference versus pump extinction ratio,
// and spatial quantum beating versus delay. Each scan point (and port pair)
// is an independent job on its own random stream family; results are
// assembled in grid order.

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <ctime>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "msfl/analysis.hpp"
#include "msfl/biphoton.hpp"
#include "msfl/counting.hpp"
#include "msfl/harness/config.hpp"
#include "msfl/parallel.hpp"

namespace msfl::harness {

struct RunOptions {
  unsigned workers = 1;  // never affects results
};

struct Share {
  double value = 0.5;
  double err = 0.5;
};

/// Fractions a/(a+b) and b/(a+b) with first-order error propagation. The
/// second share is 1 - first so both sum to exactly 1.
inline std::pair<Share, Share> normalized_shares(double a, double a_err, double b, double b_err) {
  const double n = a + b;
  if (!(n > 0.0)) return {Share{}, Share{}};
  const double pa = a / n;
  const double err = std::sqrt(b * b * a_err * a_err + a * a * b_err * b_err) / (n * n);
  return {Share{pa, err}, Share{1.0 - pa, err}};
}

struct TpiPoint {
  double r_per_db = 0.0;
  double phi_p = 0.0;
  CountsRecord bunched;      // ports D & E
  CountsRecord antibunched;  // ports D & G
  Share share_bunched;
  Share share_antibunched;
};

struct BeatingPoint {
  double delay_ps = 0.0;
  CountsRecord record;
  double normalized = 0.0;
  double normalized_err = 0.0;
};

struct NamedFit {
  std::string branch;
  FitResult fit;
};

struct RunManifest {
  RunConfig config;
  std::string artifact_version{kVersion};
  std::string started_at;
  std::string finished_at;
  std::vector<TpiPoint> tpi;
  std::vector<BeatingPoint> beating;
  std::vector<NamedFit> fits;

  const FitResult* find_fit(std::string_view branch) const {
    for (const auto& f : fits)
      if (f.branch == branch) return &f.fit;
    return nullptr;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

inline ScanSeries count_series(const std::vector<double>& x, const std::vector<const CountsRecord*>& records) {
  std::vector<double> y, acc;
  for (const auto* r : records) {
    y.push_back(static_cast<double>(r->coincidences));
    acc.push_back(r->accidentals_est);
  }
  return ScanSeries::from_counts(x, std::move(y), std::move(acc));
}

inline void require_experiment(const RunConfig& c, Experiment e) {
  if (c.experiment != e)
    throw ValidationError(fmt::format("experiment must be '{}', got '{}'", to_string(e), to_string(c.experiment)));
}

}  // namespace detail

/// For each extinction ratio on the grid: phi_p from the configured map, D&E
/// and D&G coincidences, shares normalized by their sum, and fits of both
/// branches (raw, and accidental-subtracted when requested).
inline RunManifest run_tpi_scan(const RunConfig& config, const RunOptions& options = {}) {
  detail::require_experiment(config, Experiment::TpiScan);
  config.validate();
  RunManifest m;
  m.config = config;
  m.started_at = utc_timestamp();

  const auto grid = config.scan.values();
  const std::size_t n = grid.size();
  m.tpi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.tpi[i].r_per_db = grid[i];
    m.tpi[i].phi_p = phase_from_extinction(grid[i], config.source.handedness, config.phase_map);
  }

  parallel_for(2 * n, options.workers, [&](std::size_t job) {
    auto& pt = m.tpi[job / 2];
    const bool bunched = job % 2 == 0;
    SimOptions sim{1, static_cast<std::uint32_t>(job / 2)};
    CountsRecord r = simulate_tpi_setting(config.source_at(pt.phi_p), config.detectors, config.channels,
                                          bunched ? PortPair::DE : PortPair::DG, config.pulses_per_point,
                                          config.seed, sim);
    r.setting = fmt::format("{:.6f}", pt.r_per_db);
    (bunched ? pt.bunched : pt.antibunched) = std::move(r);
  });

  std::vector<double> phi;
  std::vector<const CountsRecord*> de, dg;
  for (const auto& pt : m.tpi) {
    phi.push_back(pt.phi_p);
    de.push_back(&pt.bunched);
    dg.push_back(&pt.antibunched);
  }
  const ScanSeries de_counts = detail::count_series(phi, de);
  const ScanSeries dg_counts = detail::count_series(phi, dg);

  auto fit_shares = [&](const ScanSeries& a, const ScanSeries& b, const std::string& suffix, bool store) {
    ScanSeries sa{phi, {}, {}, std::nullopt}, sb{phi, {}, {}, std::nullopt};
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = normalized_shares(a.y[i], a.y_err[i], b.y[i], b.y_err[i]);
      sa.y.push_back(x.value);
      sa.y_err.push_back(x.err);
      sb.y.push_back(y.value);
      sb.y_err.push_back(y.err);
      if (store) {
        m.tpi[i].share_bunched = x;
        m.tpi[i].share_antibunched = y;
      }
    }
    m.fits.push_back({"bunched" + suffix, fit_tpi(sa, TpiBranch::Bunched)});
    m.fits.push_back({"antibunched" + suffix, fit_tpi(sb, TpiBranch::Antibunched)});
  };

  fit_shares(de_counts, dg_counts, "", !config.subtract_accidentals);
  if (config.subtract_accidentals)
    fit_shares(subtract_accidentals(de_counts), subtract_accidentals(dg_counts), "_subtracted", true);

  m.finished_at = utc_timestamp();
  return m;
}

/// Sweeps the delay grid behind the 50/50 coupler and fits the beating model.
/// Normalized values are counts divided by the fitted fringe-average level.
inline RunManifest run_beating_scan(const RunConfig& config, const RunOptions& options = {}) {
  detail::require_experiment(config, Experiment::BeatingScan);
  config.validate();
  RunManifest m;
  m.config = config;
  m.started_at = utc_timestamp();

  const SpectralConfig spectral = config.spectral_si();
  const SourceConfig source = config.source_at(config.pump_phase());
  const auto grid = config.scan.values();
  const std::size_t n = grid.size();
  m.beating.resize(n);

  parallel_for(n, options.workers, [&](std::size_t i) {
    auto& pt = m.beating[i];
    pt.delay_ps = grid[i];
    SimOptions sim{1, static_cast<std::uint32_t>(i)};
    pt.record = simulate_beating_setting(source, config.detectors, config.channels, grid[i] * 1e-12, spectral,
                                         config.pulses_per_point, config.seed, sim);
    pt.record.setting = fmt::format("{:.6f}", grid[i]);
  });

  std::vector<double> delays;
  std::vector<const CountsRecord*> records;
  for (const auto& pt : m.beating) {
    delays.push_back(pt.delay_ps * 1e-12);
    records.push_back(&pt.record);
  }
  const ScanSeries raw = detail::count_series(delays, records);
  m.fits.push_back({"beating", fit_beating(raw, spectral)});
  const ScanSeries* used = &raw;
  ScanSeries sub;
  if (config.subtract_accidentals) {
    sub = subtract_accidentals(raw);
    m.fits.push_back({"beating_subtracted", fit_beating(sub, spectral)});
    used = &sub;
  }
  const double level = m.fits.back().fit.offset;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = std::isfinite(level) && level > 0.0;
    m.beating[i].normalized = ok ? used->y[i] / level : 0.0;
    m.beating[i].normalized_err = ok ? used->y_err[i] / level : 0.0;
  }

  m.finished_at = utc_timestamp();
  return m;
}

struct EnvelopeContrast {
  double contrast = 0.0;
  double contrast_err = 0.0;
  double level = 0.0;  // fringe-average coincidences
};

/// Local fringe contrast |y(t0)/C - 1| / |cos(Omega t0)| at a delay t0 where
/// the carrier sits near an extremum. C comes from t0 +- T/4, where the
/// carrier crosses zero and the count equals the fringe-average level.
inline EnvelopeContrast measure_envelope_contrast(const RunConfig& config, double delay_ps, std::uint64_t pulses,
                                                  const RunOptions& options = {}) {
  detail::require_experiment(config, Experiment::BeatingScan);
  config.validate();
  const SpectralConfig spectral = config.spectral_si();
  const double t0 = delay_ps * 1e-12;
  const double carrier = std::cos(spectral.beat_angular_frequency() * t0);
  if (std::abs(carrier) < 0.99)
    throw ValidationError(fmt::format("delay {} ps is not at a beat-carrier extremum (|cos| = {:.3f})", delay_ps,
                                      std::abs(carrier)));
  const SourceConfig source = config.source_at(config.pump_phase());
  const double quarter = spectral.beat_period() / 4.0;
  const std::array<double, 3> delays = {t0, t0 - quarter, t0 + quarter};
  std::array<double, 3> y{};
  parallel_for(3, options.workers, [&](std::size_t k) {
    // Stream families beyond any scan index.
    SimOptions sim{1, 0x80000000u + static_cast<std::uint32_t>(k)};
    y[k] = static_cast<double>(
        simulate_beating_setting(source, config.detectors, config.channels, delays[k], spectral, pulses, config.seed, sim)
            .coincidences);
  });
  EnvelopeContrast e;
  e.level = 0.5 * (y[1] + y[2]);
  if (!(e.level > 0.0) || !(y[0] > 0.0)) throw std::runtime_error("no coincidences recorded for the contrast estimate");
  const double ratio = y[0] / e.level;
  e.contrast = std::abs(ratio - 1.0) / std::abs(carrier);
  const double level_var = 0.25 * (y[1] + y[2]);
  e.contrast_err = ratio * std::sqrt(1.0 / y[0] + level_var / (e.level * e.level)) / std::abs(carrier);
  return e;
}

struct StateReport {
  double phi_p = 0.0;
  std::array<Complex, 4> amplitudes{};  // (s,i) in aa, ab, ba, bb
  double p_bunched = 0.0;
  double p_antibunched = 0.0;
};

inline StateReport report_state(double phi_p) {
  if (!std::isfinite(phi_p)) throw std::domain_error("phi_p must be finite");
  const TwoPhotonState s = pbs2_output(phi_p);
  const auto p = output_probabilities(phi_p);
  return {phi_p,
          {s.amplitude(Path::PortA, Path::PortA), s.amplitude(Path::PortA, Path::PortB),
           s.amplitude(Path::PortB, Path::PortA), s.amplitude(Path::PortB, Path::PortB)},
          p.bunched,
          p.antibunched};
}

inline std::string format_state_report(const StateReport& r) {
  static constexpr std::array<const char*, 4> kLabels = {"|s>a|i>a", "|s>a|i>b", "|s>b|i>a", "|s>b|i>b"};
  std::string out = fmt::format("phi_p = {:.9f} rad\n", r.phi_p);
  out += "term        re            im            |amp|\n";
  for (std::size_t k = 0; k < 4; ++k)
    out += fmt::format("{}  {:+.9f}  {:+.9f}  {:.9f}\n", kLabels[k], r.amplitudes[k].real(), r.amplitudes[k].imag(),
                       std::abs(r.amplitudes[k]));
  out += fmt::format("P_bunched     = {:.9f}\nP_antibunched = {:.9f}\n", r.p_bunched, r.p_antibunched);
  return out;
}

}  // namespace msfl::harness
