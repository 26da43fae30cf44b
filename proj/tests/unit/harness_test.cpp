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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "msfl/harness/config.hpp"
#include "msfl/harness/experiments.hpp"
#include "msfl/harness/output.hpp"

namespace {

using namespace msfl;
using namespace msfl::harness;
constexpr double kPi = std::numbers::pi;

RunConfig small_tpi() {
  RunConfig c = RunConfig::defaults(Experiment::TpiScan);
  c.scan = {0.1, 30.0, 7};
  c.pulses_per_point = 300'000;
  c.seed = 77;
  return c;
}

bool mentions(const ValidationError& e, std::string_view what) {
  for (const auto& f : e.failures())
    if (f.find(what) != std::string::npos) return true;
  return false;
}

TEST(Config, RoundTripIsByteIdentical) {
  for (auto e : {Experiment::TpiScan, Experiment::BeatingScan, Experiment::StateReport}) {
    const std::string a = serialize(RunConfig::defaults(e));
    const std::string b = serialize(parse_config(a));
    EXPECT_EQ(a, b);
  }
  RunConfig c = small_tpi();
  c.source.mu = 0.0123456789;
  c.source.handedness = Handedness::Left;
  c.detectors[1].dark_prob = 1.5e-7;
  c.channels.extra_loss_db = 0.3;
  c.phase_map = PhaseMap::Jones;
  c.subtract_accidentals = true;
  c.seed = 18446744073709551615ull;
  const std::string a = serialize(c);
  EXPECT_EQ(serialize(parse_config(a)), a);
}

TEST(Config, UnknownKeysAreErrorsWithPaths) {
  try {
    parse_config(R"({"experiment":"tpi_scan","source":{"muu":0.01},"bogus":1,"detectors":[{"eff":1},{}]})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "source.muu"));
    EXPECT_TRUE(mentions(e, "bogus"));
    EXPECT_TRUE(mentions(e, "detectors[0].eff"));
  }
}

TEST(Config, EveryViolationIsListed) {
  try {
    parse_config(R"({"experiment":"tpi_scan","source":{"mu":0.5},"pulses_per_point":0,"scan":{"points":1}})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "mu"));
    EXPECT_TRUE(mentions(e, "pulses_per_point"));
    EXPECT_TRUE(mentions(e, "scan points"));
  }
}

TEST(Config, TypeErrorsAndBadJson) {
  EXPECT_THROW(parse_config(R"({"seed":-3})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"seed":"12"})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"phase_map":"eq7"})"), ValidationError);
  EXPECT_THROW(parse_config("{not json"), ValidationError);
  EXPECT_THROW(parse_config(R"({"spectral":{"spacing":799.9}})"), ValidationError);
  EXPECT_NO_THROW(parse_config(R"({"spectral":{"spacing":800}})"));
}

TEST(Config, ExperimentMustMatchRequested) {
  EXPECT_THROW(parse_config(R"({"experiment":"tpi_scan"})", Experiment::BeatingScan), ValidationError);
  const auto c = parse_config("{}", Experiment::BeatingScan);
  EXPECT_EQ(c.experiment, Experiment::BeatingScan);
  EXPECT_EQ(c.scan.points, 41u);
  EXPECT_DOUBLE_EQ(c.scan.stop, 5.0);
}

TEST(Config, SpectralConversionToSi) {
  const auto sp = RunConfig::defaults(Experiment::BeatingScan).spectral_si();
  EXPECT_NEAR(sp.spacing(), 800e9, 1.0);
  EXPECT_NEAR(sp.sigma, 2 * kPi * 32e9, 1e-3);
}

TEST(Beating, ZeroLengthGridIsAValidationError) {
  RunConfig c = RunConfig::defaults(Experiment::BeatingScan);
  c.scan.points = 0;
  EXPECT_THROW(run_beating_scan(c), ValidationError);
  EXPECT_THROW(parse_config(R"({"experiment":"beating_scan","scan":{"points":0}})"), ValidationError);
}

TEST(Beating, RequiresCircularPump) {
  RunConfig c = RunConfig::defaults(Experiment::BeatingScan);
  c.source.r_per = 3.0;
  EXPECT_THROW(run_beating_scan(c), ValidationError);
  EXPECT_THROW(run_tpi_scan(c), ValidationError);
}

TEST(Beating, EnvelopeContrastNeedsCarrierExtremum) {
  const RunConfig c = RunConfig::defaults(Experiment::BeatingScan);
  EXPECT_THROW(measure_envelope_contrast(c, 15.3, 1000), ValidationError);
}

TEST(Beating, ContrastNearZeroDelayIsHigh) {
  RunConfig c = RunConfig::defaults(Experiment::BeatingScan);
  c.detectors[0].dark_prob = c.detectors[1].dark_prob = 0.0;
  const auto e = measure_envelope_contrast(c, 0.625, 100'000'000);
  // sinc(sigma * 0.625 ps) diluted by two-pair accidentals at mu/(1 + mu)
  const double expect = 0.99737018277250343 / (1.0 + c.source.mu);
  EXPECT_NEAR(e.contrast, expect, 3 * e.contrast_err);
}

TEST(Tpi, SharesSumToOneAndReplayIsExact) {
  const RunConfig c = small_tpi();
  const auto m = run_tpi_scan(c);
  ASSERT_EQ(m.tpi.size(), 7u);
  for (const auto& pt : m.tpi) EXPECT_EQ(pt.share_bunched.value + pt.share_antibunched.value, 1.0);
  EXPECT_NE(m.find_fit("bunched"), nullptr);
  EXPECT_NE(m.find_fit("antibunched"), nullptr);

  const std::string manifest = to_json(m).dump(2);
  const auto again = run_tpi_scan(parse_config(manifest));
  for (std::size_t i = 0; i < m.tpi.size(); ++i) {
    EXPECT_EQ(m.tpi[i].bunched, again.tpi[i].bunched);
    EXPECT_EQ(m.tpi[i].antibunched, again.tpi[i].antibunched);
  }
  EXPECT_EQ(tpi_csv(m, TpiBranch::Bunched), tpi_csv(again, TpiBranch::Bunched));
  EXPECT_EQ(fit_csv(m.fits), fit_csv(again.fits));
}

TEST(Tpi, WorkerCountDoesNotChangeCsv) {
  const RunConfig c = small_tpi();
  const auto a = run_tpi_scan(c, {1});
  const auto b = run_tpi_scan(c, {3});
  EXPECT_EQ(tpi_csv(a, TpiBranch::Bunched), tpi_csv(b, TpiBranch::Bunched));
  EXPECT_EQ(tpi_csv(a, TpiBranch::Antibunched), tpi_csv(b, TpiBranch::Antibunched));
  EXPECT_EQ(fit_csv(a.fits), fit_csv(b.fits));
}

TEST(Tpi, SubtractionAddsBranchesAndRaisesVisibility) {
  RunConfig c = small_tpi();
  c.subtract_accidentals = true;
  c.pulses_per_point = 2'000'000;
  const auto m = run_tpi_scan(c);
  ASSERT_NE(m.find_fit("bunched_subtracted"), nullptr);
  ASSERT_NE(m.find_fit("antibunched_subtracted"), nullptr);
  EXPECT_GT(m.find_fit("antibunched_subtracted")->visibility, m.find_fit("antibunched")->visibility);
}

// Pure anti-bunched share at the circular pump. Pair rate is kept low so
// two-pair accidentals (relative size mu/2) stay far below the tolerance.
TEST(Tpi, CircularPumpPointIsAntibunched) {
  RunConfig c = RunConfig::defaults(Experiment::TpiScan);
  c.scan = {0.1, 0.1, 2};
  c.source.mu = 1e-4;
  for (auto& d : c.detectors) {
    d.efficiency = 1.0;
    d.dark_prob = 0.0;
  }
  c.channels = {0.0, 0.0};
  c.pulses_per_point = 1'000'000'000;
  const auto m = run_tpi_scan(c);
  const double p_ab = 0.99946999753348866;
  for (const auto& pt : m.tpi) {
    EXPECT_NEAR(pt.phi_p, 1.5477725102738985, 1e-12);
    EXPECT_GE(pt.share_antibunched.value, 0.999);
    EXPECT_NEAR(pt.share_antibunched.value, (p_ab + c.source.mu / 2) / (1 + c.source.mu),
                3 * pt.share_antibunched.err);
  }
}

// At the source default mu = 0.01 the DE share carries roughly mu/2 of
// two-pair accidentals on top of the intrinsic bunched probability.
TEST(Tpi, DefaultRateShareIncludesTwoPairAccidentals) {
  RunConfig c = RunConfig::defaults(Experiment::TpiScan);
  c.scan = {0.1, 0.1, 2};
  for (auto& d : c.detectors) d.dark_prob = 0.0;
  c.pulses_per_point = 50'000'000;
  const auto m = run_tpi_scan(c);
  const double expect = (0.99946999753348866 + c.source.mu / 2) / (1 + c.source.mu);
  for (const auto& pt : m.tpi) EXPECT_NEAR(pt.share_antibunched.value, expect, 3 * pt.share_antibunched.err);
}

TEST(Tpi, HandednessDoesNotChangeProbabilities) {
  RunConfig c = small_tpi();
  const auto a = run_tpi_scan(c);
  c.source.handedness = Handedness::Left;
  const auto b = run_tpi_scan(c);
  for (std::size_t i = 0; i < a.tpi.size(); ++i) EXPECT_EQ(a.tpi[i].phi_p, -b.tpi[i].phi_p);
}

TEST(Shares, NormalizationAndEmptyInput) {
  const auto [a, b] = normalized_shares(30.0, std::sqrt(30.0), 70.0, std::sqrt(70.0));
  EXPECT_DOUBLE_EQ(a.value, 0.3);
  EXPECT_EQ(a.value + b.value, 1.0);
  EXPECT_NEAR(a.err, std::sqrt(0.3 * 0.7 / 100.0), 1e-12);
  const auto [c, d] = normalized_shares(0.0, 1.0, 0.0, 1.0);
  EXPECT_EQ(c.value + d.value, 1.0);
}

TEST(StateReport, SpecialPoints) {
  const double h = std::numbers::sqrt2 / 2;
  const auto b = report_state(0.0);
  EXPECT_NEAR(std::abs(b.amplitudes[0]), h, 1e-12);
  EXPECT_NEAR(std::abs(b.amplitudes[3]), h, 1e-12);
  EXPECT_NEAR(std::abs(b.amplitudes[1]), 0.0, 1e-12);
  EXPECT_NEAR(b.p_bunched, 1.0, 1e-12);
  EXPECT_NEAR(b.p_antibunched, 0.0, 1e-12);

  const auto ab = report_state(kPi / 2);
  EXPECT_NEAR(std::abs(ab.amplitudes[1]), h, 1e-12);
  EXPECT_NEAR(std::abs(ab.amplitudes[2]), h, 1e-12);
  EXPECT_NEAR(std::abs(ab.amplitudes[0]), 0.0, 1e-12);
  EXPECT_NEAR(ab.p_antibunched, 1.0, 1e-12);

  const auto q = report_state(kPi / 4);
  for (const auto& a : q.amplitudes) EXPECT_NEAR(std::abs(a), 0.5, 1e-12);
  EXPECT_THROW(report_state(NAN), std::domain_error);
  EXPECT_NE(format_state_report(q).find("P_bunched"), std::string::npos);
}

TEST(Csv, ScanCsvParsesBack) {
  const auto m = run_tpi_scan(small_tpi());
  const std::string text = tpi_csv(m, TpiBranch::Antibunched);
  EXPECT_EQ(text.substr(0, text.find('\n')), kScanCsvHeader);
  const auto rows = parse_scan_csv(text);
  ASSERT_EQ(rows.size(), m.tpi.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].coincidences, m.tpi[i].antibunched.coincidences);
    EXPECT_EQ(rows[i].setting, m.tpi[i].antibunched.setting);
    EXPECT_NEAR(rows[i].phi_p, m.tpi[i].phi_p, 1e-12);
  }
  EXPECT_THROW(parse_scan_csv("a,b\n1,2\n"), ValidationError);
  EXPECT_THROW(parse_scan_csv(std::string(kScanCsvHeader) + "\n1,2,3\n"), ValidationError);
  EXPECT_THROW(parse_scan_csv(std::string(kScanCsvHeader) + "\nx,y,1,1,1,1,1,1\n"), ValidationError);
}

TEST(Csv, FitCsvHeaderAndBeatingPeriodInPs) {
  std::vector<NamedFit> fits{{"beating", FitResult{}}};
  fits[0].fit.period = 1.25e-12;
  const auto text = fit_csv(fits);
  EXPECT_EQ(text.substr(0, text.find('\n')), kFitCsvHeader);
  EXPECT_NE(text.find(",1.25,"), std::string::npos);
}

}  // namespace
