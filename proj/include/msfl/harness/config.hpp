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

// Run configuration for the experiment harness and its strict JSON form.
// Values are held in interface units (dB, ps, GHz, ns); conversion to SI
// happens when a run builds its simulation configs.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "msfl/biphoton.hpp"
#include "msfl/counting.hpp"
#include "msfl/diagnostics.hpp"
#include "msfl/polarization.hpp"

namespace msfl::harness {

using Json = nlohmann::ordered_json;

enum class Experiment { TpiScan, BeatingScan, StateReport };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::TpiScan: return "tpi_scan";
    case Experiment::BeatingScan: return "beating_scan";
    case Experiment::StateReport: return "state_report";
  }
  return "?";
}

inline Experiment parse_experiment(std::string_view s) {
  if (s == "tpi_scan") return Experiment::TpiScan;
  if (s == "beating_scan") return Experiment::BeatingScan;
  if (s == "state_report") return Experiment::StateReport;
  throw std::invalid_argument(fmt::format("unknown experiment '{}'", s));
}

/// Inclusive, evenly spaced grid. Units: dB for TPI scans, ps for beating.
struct ScanGrid {
  double start = 0.0;
  double stop = 0.0;
  std::uint32_t points = 0;

  std::vector<double> values() const {
    std::vector<double> v(points);
    for (std::uint32_t i = 0; i < points; ++i)
      v[i] = points == 1 ? start : start + (stop - start) * i / (points - 1);
    if (points > 1) v.back() = stop;
    return v;
  }
};

struct RunConfig {
  struct Source {
    double mu = 0.01;
    double noise_signal = 0.0;
    double noise_idler = 0.0;
    double r_per = 0.1;  // dB; sets phi_p for beating and state reports
    Handedness handedness = Handedness::Right;
  };
  struct Spectral {  // GHz; sigma is the angular bandwidth divided by 2 pi
    double nu_signal = 192700.0;
    double nu_idler = 193500.0;
    double sigma = 32.0;
  };

  Experiment experiment = Experiment::TpiScan;
  Source source;
  DetectorPair detectors = default_detectors();
  ChannelConfig channels;
  Spectral spectral;
  ScanGrid scan{0.1, 30.0, 21};
  std::uint64_t pulses_per_point = 1'000'000;
  std::uint64_t seed = 12345;
  PhaseMap phase_map = PhaseMap::Eq1;
  bool subtract_accidentals = false;

  static ScanGrid default_scan(Experiment e) {
    switch (e) {
      case Experiment::TpiScan: return {0.1, 30.0, 21};
      case Experiment::BeatingScan: return {0.0, 5.0, 41};
      case Experiment::StateReport: return {0.0, 0.0, 0};
    }
    return {};
  }

  static RunConfig defaults(Experiment e) {
    RunConfig c;
    c.experiment = e;
    c.scan = default_scan(e);
    return c;
  }

  SpectralConfig spectral_si() const {
    constexpr double kGHz = 1e9;
    return {spectral.nu_signal * kGHz, spectral.nu_idler * kGHz, 2.0 * std::numbers::pi * spectral.sigma * kGHz};
  }

  double spacing_ghz() const { return std::abs(spectral.nu_idler - spectral.nu_signal); }

  /// Pump phase for the configured source ellipse.
  double pump_phase() const { return phase_from_extinction(source.r_per, source.handedness, phase_map); }

  SourceConfig source_at(double phi_p) const {
    return {source.mu, source.noise_signal, source.noise_idler, phi_p};
  }

  std::vector<std::string> check() const {
    Checker c;
    c.merge(source_at(0.0).check());
    c.require(std::isfinite(source.r_per) && source.r_per >= 0.0, "source r_per must be finite and >= 0");
    c.merge(detectors[0].check("detectors[0]"));
    c.merge(detectors[1].check("detectors[1]"));
    c.merge(channels.check());
    c.require(std::isfinite(spectral.nu_signal) && spectral.nu_signal > 0.0, "spectral nu_signal must be > 0");
    c.require(std::isfinite(spectral.nu_idler) && spectral.nu_idler > 0.0, "spectral nu_idler must be > 0");
    c.require(spacing_ghz() > 0.0, "spectral spacing must be > 0");
    c.require(std::isfinite(spectral.sigma) && spectral.sigma > 0.0, "spectral sigma must be > 0");
    c.require(pulses_per_point >= 1, "pulses_per_point must be >= 1");
    if (experiment != Experiment::StateReport) {
      c.require(scan.points >= 2, "scan points must be >= 2");
      c.require(std::isfinite(scan.start) && std::isfinite(scan.stop), "scan start/stop must be finite");
    }
    if (experiment == Experiment::TpiScan)
      c.require(scan.start >= 0.0 && scan.stop >= 0.0, "TPI scan r_per values must be >= 0 dB");
    if (experiment == Experiment::BeatingScan)
      c.require(source.r_per <= 0.1, "beating scan needs a circular pump (source r_per <= 0.1 dB)");
    return c.failures();
  }

  void validate() const {
    Checker c;
    c.merge(check());
    c.throw_if_failed();
  }
};

inline Json to_json(const RunConfig& c) {
  Json j;
  j["experiment"] = to_string(c.experiment);
  j["source"] = {{"mu", c.source.mu},
                 {"noise_signal", c.source.noise_signal},
                 {"noise_idler", c.source.noise_idler},
                 {"r_per", c.source.r_per},
                 {"handedness", to_string(c.source.handedness)}};
  j["detectors"] = Json::array();
  for (const auto& d : c.detectors)
    j["detectors"].push_back({{"efficiency", d.efficiency}, {"dark_prob", d.dark_prob}, {"gate_window", d.gate_window_ns}});
  j["channels"] = {{"insertion_loss", c.channels.insertion_loss_db}, {"extra_loss", c.channels.extra_loss_db}};
  j["spectral"] = {{"nu_signal", c.spectral.nu_signal},
                   {"nu_idler", c.spectral.nu_idler},
                   {"spacing", c.spacing_ghz()},
                   {"sigma", c.spectral.sigma}};
  j["scan"] = {{"start", c.scan.start}, {"stop", c.scan.stop}, {"points", c.scan.points}};
  j["pulses_per_point"] = c.pulses_per_point;
  j["seed"] = c.seed;
  j["phase_map"] = to_string(c.phase_map);
  j["subtract_accidentals"] = c.subtract_accidentals;
  return j;
}

namespace detail {

/// Strict reader: records unknown keys and type errors with their paths.
class Reader {
 public:
  explicit Reader(Checker& errors) : errors_(errors) {}

  bool object(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      errors_.require(false, fmt::format("'{}' must be an object", path));
      return false;
    }
    const std::set<std::string_view> keys(allowed);
    for (const auto& [k, _] : j.items())
      errors_.require(keys.contains(k), fmt::format("unknown key '{}{}{}'", path, path.empty() ? "" : ".", k));
    return true;
  }

  void number(const Json& j, std::string_view key, const std::string& path, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number()) out = v.get<double>();
    else errors_.require(false, fmt::format("'{}' must be a number", join(path, key)));
  }

  template <class U>
  void unsigned_integer(const Json& j, std::string_view key, const std::string& path, U& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      const auto raw = v.get<std::uint64_t>();
      if (raw > std::numeric_limits<U>::max()) errors_.require(false, fmt::format("'{}' is out of range", join(path, key)));
      else out = static_cast<U>(raw);
    } else {
      errors_.require(false, fmt::format("'{}' must be a non-negative integer", join(path, key)));
    }
  }

  void boolean(const Json& j, std::string_view key, const std::string& path, bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_boolean()) out = v.get<bool>();
    else errors_.require(false, fmt::format("'{}' must be true or false", join(path, key)));
  }

  template <class Enum, class Parse>
  void enumeration(const Json& j, std::string_view key, const std::string& path, Enum& out, Parse parse) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_string()) {
      errors_.require(false, fmt::format("'{}' must be a string", join(path, key)));
      return;
    }
    try {
      out = parse(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      errors_.require(false, fmt::format("'{}': {}", join(path, key), e.what()));
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
  }

 private:
  Checker& errors_;
};

}  // namespace detail

/// Builds a RunConfig from JSON. Missing keys keep their defaults (the scan
/// grid defaults per experiment); unknown keys, wrong types and violated
/// invariants are all reported in one ValidationError.
inline RunConfig from_json(const Json& j, std::optional<Experiment> fallback = std::nullopt) {
  Checker errors;
  detail::Reader rd(errors);
  if (!rd.object(j, "", {"experiment", "source", "detectors", "channels", "spectral", "scan", "pulses_per_point",
                         "seed", "phase_map", "subtract_accidentals"}))
    errors.throw_if_failed();

  Experiment exp = fallback.value_or(Experiment::TpiScan);
  rd.enumeration(j, "experiment", "", exp, parse_experiment);
  if (fallback && exp != *fallback)
    errors.require(false, fmt::format("config experiment '{}' does not match the requested '{}'", to_string(exp),
                                      to_string(*fallback)));
  RunConfig c = RunConfig::defaults(exp);

  if (j.contains("source") && rd.object(j.at("source"), "source", {"mu", "noise_signal", "noise_idler", "r_per", "handedness"})) {
    const auto& s = j.at("source");
    rd.number(s, "mu", "source", c.source.mu);
    rd.number(s, "noise_signal", "source", c.source.noise_signal);
    rd.number(s, "noise_idler", "source", c.source.noise_idler);
    rd.number(s, "r_per", "source", c.source.r_per);
    rd.enumeration(s, "handedness", "source", c.source.handedness, parse_handedness);
  }
  if (j.contains("detectors")) {
    const auto& d = j.at("detectors");
    if (!d.is_array() || d.size() != 2) {
      errors.require(false, "'detectors' must be an array of exactly two detectors");
    } else {
      for (std::size_t i = 0; i < 2; ++i) {
        const std::string path = fmt::format("detectors[{}]", i);
        if (!rd.object(d[i], path, {"efficiency", "dark_prob", "gate_window"})) continue;
        rd.number(d[i], "efficiency", path, c.detectors[i].efficiency);
        rd.number(d[i], "dark_prob", path, c.detectors[i].dark_prob);
        rd.number(d[i], "gate_window", path, c.detectors[i].gate_window_ns);
      }
    }
  }
  if (j.contains("channels") && rd.object(j.at("channels"), "channels", {"insertion_loss", "extra_loss"})) {
    rd.number(j.at("channels"), "insertion_loss", "channels", c.channels.insertion_loss_db);
    rd.number(j.at("channels"), "extra_loss", "channels", c.channels.extra_loss_db);
  }
  if (j.contains("spectral") && rd.object(j.at("spectral"), "spectral", {"nu_signal", "nu_idler", "spacing", "sigma"})) {
    const auto& s = j.at("spectral");
    rd.number(s, "nu_signal", "spectral", c.spectral.nu_signal);
    rd.number(s, "nu_idler", "spectral", c.spectral.nu_idler);
    rd.number(s, "sigma", "spectral", c.spectral.sigma);
    if (s.contains("spacing")) {
      double spacing = 0.0;
      rd.number(s, "spacing", "spectral", spacing);
      errors.require(spacing == c.spacing_ghz(),
                     fmt::format("spectral spacing {} must equal |nu_idler - nu_signal| = {}", spacing, c.spacing_ghz()));
    }
  }
  if (j.contains("scan") && rd.object(j.at("scan"), "scan", {"start", "stop", "points"})) {
    rd.number(j.at("scan"), "start", "scan", c.scan.start);
    rd.number(j.at("scan"), "stop", "scan", c.scan.stop);
    rd.unsigned_integer(j.at("scan"), "points", "scan", c.scan.points);
  }
  rd.unsigned_integer(j, "pulses_per_point", "", c.pulses_per_point);
  rd.unsigned_integer(j, "seed", "", c.seed);
  rd.enumeration(j, "phase_map", "", c.phase_map, parse_phase_map);
  rd.boolean(j, "subtract_accidentals", "", c.subtract_accidentals);

  if (errors.ok()) errors.merge(c.check());
  errors.throw_if_failed();
  return c;
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Parses a config document. A saved run manifest is accepted as well; its
/// embedded config is used.
inline RunConfig parse_config(std::string_view text, std::optional<Experiment> fallback = std::nullopt) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (j.is_object() && j.contains("artifact_version") && j.contains("config")) return from_json(j.at("config"), fallback);
  return from_json(j, fallback);
}

}  // namespace msfl::harness
