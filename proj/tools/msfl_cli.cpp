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

// Command-line front end: tpi-scan, beating-scan, state, fit.
// Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "msfl/analysis.hpp"
#include "msfl/harness/config.hpp"
#include "msfl/harness/experiments.hpp"
#include "msfl/harness/output.hpp"

namespace {

using namespace msfl;
using namespace msfl::harness;

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool subtract = false;
  unsigned workers = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run config (or a saved manifest to replay)");
  cmd->add_option("--seed", f.seed, "Override the config seed");
  cmd->add_option("--out", f.out_dir, "Output directory")->capture_default_str();
  cmd->add_flag("--subtract-accidentals", f.subtract, "Also fit accidental-subtracted data");
  cmd->add_option("--workers", f.workers, "Worker threads (results do not depend on this)")->capture_default_str();
}

RunConfig load_config(const CommonFlags& f, Experiment e) {
  RunConfig c = f.config_path.empty() ? RunConfig::defaults(e) : parse_config(read_file(f.config_path), e);
  if (f.seed) c.seed = *f.seed;
  if (f.subtract) c.subtract_accidentals = true;
  c.validate();
  return c;
}

void print_fits(const RunManifest& m) {
  for (const auto& [branch, fit] : m.fits)
    std::cout << fmt::format("{:<24} V = {:.4f} +- {:.4f}  converged={}\n", branch, fit.visibility,
                             fit.visibility_err, fit.converged);
}

int run_scan(const CommonFlags& f, Experiment e) {
  const RunConfig c = load_config(f, e);
  const RunOptions opts{f.workers};
  const RunManifest m = e == Experiment::TpiScan ? run_tpi_scan(c, opts) : run_beating_scan(c, opts);
  for (const auto& p : write_outputs(m, f.out_dir)) std::cout << "wrote " << p.string() << '\n';
  print_fits(m);
  return 0;
}

struct StateFlags {
  std::optional<double> phi_p;
  std::optional<double> r_per;
  std::string handedness = "right";
  std::string phase_map = "eq1";
};

int run_state(const StateFlags& f) {
  double phi = 0.0;
  if (f.phi_p) {
    phi = *f.phi_p;
  } else {
    const double r = f.r_per.value_or(0.0);
    phi = phase_from_extinction(r, parse_handedness(f.handedness), parse_phase_map(f.phase_map));
  }
  std::cout << format_state_report(report_state(phi));
  return 0;
}

struct FitFlags {
  std::string input;
  std::string model = "tpi-antibunched";
  std::string column;
  std::string config_path;
  std::string out_dir;
  bool subtract = false;
};

int run_fit(const FitFlags& f) {
  const auto rows = parse_scan_csv(read_file(f.input));
  const bool beating = f.model == "beating";
  if (!beating && f.model != "tpi-bunched" && f.model != "tpi-antibunched")
    throw ValidationError(fmt::format("unknown model '{}' (expected tpi-bunched|tpi-antibunched|beating)", f.model));
  const std::string column = f.column.empty() ? (beating ? "coincidences" : "normalized") : f.column;
  if (column != "coincidences" && column != "normalized")
    throw ValidationError(fmt::format("unknown column '{}' (expected coincidences|normalized)", column));
  if (f.subtract && column != "coincidences")
    throw ValidationError("--subtract-accidentals needs the coincidences column");

  std::vector<double> x, y, acc, err;
  for (const auto& r : rows) {
    x.push_back(beating ? std::stod(r.setting) * 1e-12 : r.phi_p);
    y.push_back(column == "coincidences" ? static_cast<double>(r.coincidences) : r.normalized);
    err.push_back(r.normalized_err);
    acc.push_back(r.accidentals_est);
  }
  ScanSeries s;
  if (column == "coincidences") {
    s = ScanSeries::from_counts(x, y, acc);
  } else {
    s = ScanSeries{x, y, err, acc};
    s.validate();
  }
  if (f.subtract) s = subtract_accidentals(s);

  std::vector<NamedFit> fits;
  const std::string suffix = f.subtract ? "_subtracted" : "";
  if (beating) {
    const RunConfig c = f.config_path.empty() ? RunConfig::defaults(Experiment::BeatingScan)
                                              : parse_config(read_file(f.config_path), Experiment::BeatingScan);
    fits.push_back({"beating" + suffix, fit_beating(s, c.spectral_si())});
  } else {
    const bool bunched = f.model == "tpi-bunched";
    fits.push_back({(bunched ? "bunched" : "antibunched") + suffix,
                    fit_tpi(s, bunched ? TpiBranch::Bunched : TpiBranch::Antibunched)});
  }
  const std::string report = fit_csv(fits);
  if (f.out_dir.empty()) {
    std::cout << report;
  } else {
    std::filesystem::create_directories(f.out_dir);
    write_file(std::filesystem::path(f.out_dir) / "fits.csv", report);
    std::cout << "wrote " << (std::filesystem::path(f.out_dir) / "fits.csv").string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msfl: Sagnac-loop frequency-entangled pair source simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(msfl::kVersion));

  CommonFlags tpi_flags, beat_flags;
  auto* tpi = app.add_subcommand("tpi-scan", "Two-photon interference versus pump extinction ratio");
  add_common(tpi, tpi_flags);
  auto* beat = app.add_subcommand("beating-scan", "Spatial quantum beating versus relative delay");
  add_common(beat, beat_flags);

  StateFlags state_flags;
  auto* state = app.add_subcommand("state", "Print PBS2 output amplitudes and branch probabilities");
  auto* phi_opt = state->add_option("--phi-p", state_flags.phi_p, "Pump phase in rad");
  state->add_option("--r-per", state_flags.r_per, "Pump extinction ratio in dB")->excludes(phi_opt);
  state->add_option("--handedness", state_flags.handedness, "right|left")->capture_default_str();
  state->add_option("--phase-map", state_flags.phase_map, "eq1|jones")->capture_default_str();

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Fit an external scan CSV");
  fit->add_option("--input", fit_flags.input, "Scan CSV")->required();
  fit->add_option("--model", fit_flags.model, "tpi-bunched|tpi-antibunched|beating")->capture_default_str();
  fit->add_option("--column", fit_flags.column, "coincidences|normalized (default depends on model)");
  fit->add_option("--config", fit_flags.config_path, "Config supplying spectral parameters for beating fits");
  fit->add_option("--out", fit_flags.out_dir, "Write fits.csv here instead of stdout");
  fit->add_flag("--subtract-accidentals", fit_flags.subtract, "Subtract the accidentals_est column first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*tpi) return run_scan(tpi_flags, Experiment::TpiScan);
    if (*beat) return run_scan(beat_flags, Experiment::BeatingScan);
    if (*state) return run_state(state_flags);
    if (*fit) return run_fit(fit_flags);
  } catch (const msfl::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
