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

// Tabular and manifest output. Number formatting is fixed so identical runs
// produce byte-identical files.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "msfl/harness/experiments.hpp"

namespace msfl::harness {

inline constexpr std::string_view kScanCsvHeader =
    "setting,phi_p_rad,singles_1,singles_2,coincidences,accidentals_est,normalized,normalized_err";
inline constexpr std::string_view kFitCsvHeader =
    "branch,visibility,visibility_err,period,phase,offset,residual_rms,converged";

namespace detail {
inline std::string scan_row(const CountsRecord& r, double phi_p, double normalized, double normalized_err) {
  return fmt::format("{},{:.12f},{},{},{},{:.6f},{:.12f},{:.12f}\n", r.setting, phi_p, r.singles_1, r.singles_2,
                     r.coincidences, r.accidentals_est, normalized, normalized_err);
}
}  // namespace detail

/// One branch of a TPI scan; `setting` is r_per in dB.
inline std::string tpi_csv(const RunManifest& m, TpiBranch branch) {
  std::string out{kScanCsvHeader};
  out += '\n';
  for (const auto& pt : m.tpi) {
    const bool b = branch == TpiBranch::Bunched;
    const auto& share = b ? pt.share_bunched : pt.share_antibunched;
    out += detail::scan_row(b ? pt.bunched : pt.antibunched, pt.phi_p, share.value, share.err);
  }
  return out;
}

/// Beating scan; `setting` is the delay in ps.
inline std::string beating_csv(const RunManifest& m) {
  std::string out{kScanCsvHeader};
  out += '\n';
  const double phi = m.config.pump_phase();
  for (const auto& pt : m.beating) out += detail::scan_row(pt.record, phi, pt.normalized, pt.normalized_err);
  return out;
}

/// Periods are reported in rad of phi_p for TPI branches and ps for beating.
inline std::string fit_csv(const std::vector<NamedFit>& fits) {
  std::string out{kFitCsvHeader};
  out += '\n';
  for (const auto& [branch, f] : fits) {
    const bool beating = branch.starts_with("beating");
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", branch, f.visibility, f.visibility_err,
                       beating ? f.period * 1e12 : f.period, f.phase, f.offset, f.residual_rms,
                       f.converged ? "true" : "false");
  }
  return out;
}

inline Json to_json(const CountsRecord& r) {
  return {{"setting", r.setting},         {"pulses", r.pulses},
          {"singles_1", r.singles_1},     {"singles_2", r.singles_2},
          {"coincidences", r.coincidences}, {"accidentals_est", r.accidentals_est}};
}

inline Json to_json(const NamedFit& f) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return {{"branch", f.branch},
          {"visibility", num(f.fit.visibility)},
          {"visibility_err", num(f.fit.visibility_err)},
          {"period", num(f.fit.period)},
          {"phase", num(f.fit.phase)},
          {"offset", num(f.fit.offset)},
          {"residual_rms", num(f.fit.residual_rms)},
          {"chi2", num(f.fit.chi2)},
          {"iterations", f.fit.iterations},
          {"converged", f.fit.converged},
          {"message", f.fit.message}};
}

inline Json to_json(const RunManifest& m) {
  Json j;
  j["artifact"] = "msfl";
  j["artifact_version"] = m.artifact_version;
  j["seed"] = m.config.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["config"] = to_json(m.config);
  Json points = Json::array();
  for (const auto& pt : m.tpi)
    points.push_back({{"r_per_db", pt.r_per_db},
                      {"phi_p_rad", pt.phi_p},
                      {"DE", to_json(pt.bunched)},
                      {"DG", to_json(pt.antibunched)},
                      {"share_bunched", pt.share_bunched.value},
                      {"share_antibunched", pt.share_antibunched.value}});
  for (const auto& pt : m.beating)
    points.push_back({{"delay_ps", pt.delay_ps}, {"record", to_json(pt.record)}, {"normalized", pt.normalized}});
  j["points"] = std::move(points);
  Json fits = Json::array();
  for (const auto& f : m.fits) fits.push_back(to_json(f));
  j["fits"] = std::move(fits);
  return j;
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  f << contents;
  if (!f) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Writes manifest.json, the per-scan CSV(s) and fits.csv into `dir`.
/// Returns the paths written.
inline std::vector<std::filesystem::path> write_outputs(const RunManifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, std::string_view text) {
    write_file(dir / name, text);
    written.push_back(dir / name);
  };
  if (!m.tpi.empty()) {
    put("tpi_bunched_DE.csv", tpi_csv(m, TpiBranch::Bunched));
    put("tpi_antibunched_DG.csv", tpi_csv(m, TpiBranch::Antibunched));
  }
  if (!m.beating.empty()) put("beating.csv", beating_csv(m));
  put("fits.csv", fit_csv(m.fits));
  put("manifest.json", to_json(m).dump(2) + "\n");
  return written;
}

struct ScanRow {
  std::string setting;
  double phi_p = 0.0;
  std::uint64_t singles_1 = 0, singles_2 = 0, coincidences = 0;
  double accidentals_est = 0.0;
  double normalized = 0.0;
  double normalized_err = 0.0;
};

/// Reads a scan CSV in the format written above.
inline std::vector<ScanRow> parse_scan_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("scan CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kScanCsvHeader) throw ValidationError(fmt::format("unexpected scan CSV header '{}'", line));
  std::vector<ScanRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ValidationError(fmt::format("line {}: expected 8 fields, got {}", lineno, f.size()));
    try {
      ScanRow r;
      r.setting = f[0];
      r.phi_p = std::stod(f[1]);
      r.singles_1 = std::stoull(f[2]);
      r.singles_2 = std::stoull(f[3]);
      r.coincidences = std::stoull(f[4]);
      r.accidentals_est = std::stod(f[5]);
      r.normalized = std::stod(f[6]);
      r.normalized_err = std::stod(f[7]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ValidationError(fmt::format("line {}: malformed number", lineno));
    }
  }
  return rows;
}

}  // namespace msfl::harness
