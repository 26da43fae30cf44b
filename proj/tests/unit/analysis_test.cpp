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
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "msfl/analysis.hpp"

namespace {

using namespace msfl;
constexpr double kPi = std::numbers::pi;

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

double tpi_model(double x, double a, double v, double phi0, TpiBranch b) {
  const double s = b == TpiBranch::Bunched ? 1.0 : -1.0;
  return a * (1.0 + s * v * std::cos(2.0 * x + phi0));
}

double beat_model(double x, double c, double v, double omega, double phi0, const SpectralConfig& sp) {
  return c * (1.0 - v * sinc(sp.sigma * x) * std::cos(omega * x + phi0));
}

ScanSeries tpi_series(double a, double v, double phi0, TpiBranch b, int n = 21, double hi = kPi) {
  ScanSeries s;
  s.x = linspace(0.0, hi, n);
  for (double x : s.x) s.y.push_back(tpi_model(x, a, v, phi0, b));
  for (double y : s.y) s.y_err.push_back(std::sqrt(std::max(y, 1.0)));
  return s;
}

ScanSeries beat_series(double c, double v, double phi0, const SpectralConfig& sp, int n = 41,
                       double hi = 5e-12) {
  ScanSeries s;
  s.x = linspace(0.0, hi, n);
  for (double x : s.x) s.y.push_back(beat_model(x, c, v, sp.beat_angular_frequency(), phi0, sp));
  for (double y : s.y) s.y_err.push_back(std::sqrt(std::max(y, 1.0)));
  return s;
}

ScanSeries poissonize(ScanSeries s, unsigned seed) {
  std::mt19937_64 rng(seed);
  for (auto& y : s.y) y = double(std::poisson_distribution<long>(y)(rng));
  return ScanSeries::from_counts(s.x, s.y);
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

TEST(FitTpi, NoiselessUnitVisibility) {
  for (auto b : {TpiBranch::Bunched, TpiBranch::Antibunched}) {
    const auto r = fit_tpi(tpi_series(1000.0, 1.0, 0.0, b), b);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_NEAR(r.visibility, 1.0, 1e-9);
    EXPECT_NEAR(r.phase, 0.0, 1e-9);
    EXPECT_LT(r.residual_rms, 1e-9);
    EXPECT_DOUBLE_EQ(r.period, kPi);
  }
}

TEST(FitTpi, NoiselessParameterRecovery) {
  for (double phi0 : {-2.5, -0.4, 0.0, 0.3, 1.7, 3.0}) {
    const auto r = fit_tpi(tpi_series(850.0, 0.93, phi0, TpiBranch::Antibunched), TpiBranch::Antibunched);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LT(rel(r.visibility, 0.93), 1e-6) << phi0;
    EXPECT_LT(rel(r.offset, 850.0), 1e-6) << phi0;
    EXPECT_NEAR(r.phase, phi0, 1e-6) << phi0;
    EXPECT_LT(r.residual_rms, 1e-9);
  }
}

TEST(FitTpi, DefaultExtinctionGridIsFittable) {
  // phi_p from 0.1..30 dB covers slightly less than pi/2
  std::vector<double> x;
  for (double r : linspace(0.1, 30.0, 21)) x.push_back(2.0 * std::atan(std::pow(10.0, -r / 10.0)));
  ScanSeries s;
  s.x = x;
  for (double v : x) s.y.push_back(tpi_model(v, 1.0, 0.97, 0.0, TpiBranch::Bunched));
  s.y_err.assign(x.size(), 0.01);
  const auto r = fit_tpi(s, TpiBranch::Bunched);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_LT(rel(r.visibility, 0.97), 1e-6);
}

TEST(FitTpi, PoissonNoiseRecoversWithinThreeSigma) {
  int inside = 0;
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const auto s = poissonize(tpi_series(2000.0, 0.98, 0.0, TpiBranch::Bunched), seed);
    const auto r = fit_tpi(s, TpiBranch::Bunched);
    ASSERT_TRUE(r.converged) << r.message;
    ASSERT_GT(r.visibility_err, 0.0);
    inside += std::abs(r.visibility - 0.98) < 3 * r.visibility_err;
  }
  EXPECT_GE(inside, 19);
}

TEST(FitTpi, ScaleEquivariance) {
  const auto s = poissonize(tpi_series(1500.0, 0.9, 0.2, TpiBranch::Bunched), 3);
  const auto a = fit_tpi(s, TpiBranch::Bunched);
  for (double k : {1e-3, 0.37, 12.5}) {
    ScanSeries t = s;
    for (auto& y : t.y) y *= k;
    for (auto& e : t.y_err) e *= k;
    const auto b = fit_tpi(t, TpiBranch::Bunched);
    EXPECT_NEAR(b.visibility, a.visibility, 1e-9) << k;
    EXPECT_NEAR(b.phase, a.phase, 1e-9) << k;
    EXPECT_NEAR(b.period, a.period, 1e-9) << k;
    EXPECT_NEAR(b.visibility_err, a.visibility_err, 1e-9) << k;
    EXPECT_NEAR(b.offset / k, a.offset, 1e-9 * a.offset);
  }
}

TEST(FitTpi, ShiftEquivarianceMovesOnlyThePhase) {
  const auto s = poissonize(tpi_series(1500.0, 0.9, 0.2, TpiBranch::Antibunched), 4);
  const auto a = fit_tpi(s, TpiBranch::Antibunched);
  for (double c : {-0.8, 0.05, 0.6}) {
    ScanSeries t = s;
    for (auto& x : t.x) x += c;
    const auto b = fit_tpi(t, TpiBranch::Antibunched);
    EXPECT_NEAR(b.visibility, a.visibility, 1e-9) << c;
    EXPECT_NEAR(b.offset, a.offset, 1e-9 * a.offset) << c;
    EXPECT_NEAR(std::remainder(b.phase - (a.phase - 2 * c), 2 * kPi), 0.0, 1e-9) << c;
  }
}

TEST(FitTpi, PreconditionsReportNonConvergence) {
  const auto few = tpi_series(100.0, 0.9, 0.0, TpiBranch::Bunched, 4);
  EXPECT_FALSE(fit_tpi(few, TpiBranch::Bunched).converged);
  const auto narrow = tpi_series(100.0, 0.9, 0.0, TpiBranch::Bunched, 10, 0.4 * kPi);
  const auto r = fit_tpi(narrow, TpiBranch::Bunched);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.message.empty());
  ScanSeries bad = few;
  bad.y_err.pop_back();
  EXPECT_THROW(fit_tpi(bad, TpiBranch::Bunched), ValidationError);
}

TEST(FitTpi, GridTieBreakPrefersSmallPhase) {
  // constant data: any phase fits equally, V = 0
  ScanSeries s;
  s.x = linspace(0.0, kPi, 11);
  s.y.assign(11, 50.0);
  s.y_err.assign(11, 1.0);
  const auto r = fit_tpi(s, TpiBranch::Bunched);
  EXPECT_NEAR(r.visibility, 0.0, 1e-12);
}

TEST(FitBeating, NoiselessParameterRecovery) {
  const SpectralConfig sp;
  for (double phi0 : {0.0, 0.25, -1.0}) {
    const auto r = fit_beating(beat_series(500.0, 0.982, phi0, sp), sp);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LT(rel(r.visibility, 0.982), 1e-6);
    EXPECT_LT(rel(r.offset, 500.0), 1e-6);
    EXPECT_LT(rel(r.period, 1.25e-12), 1e-6);
    EXPECT_NEAR(r.phase, phi0, 1e-6);
    EXPECT_LT(r.residual_rms, 1e-9);
  }
}

TEST(FitBeating, RecoversDetunedFrequency) {
  const SpectralConfig sp;
  ScanSeries s;
  s.x = linspace(0.0, 5e-12, 41);
  const double omega = 1.04 * sp.beat_angular_frequency();
  for (double x : s.x) s.y.push_back(beat_model(x, 300.0, 0.9, omega, 0.0, sp));
  s.y_err.assign(s.size(), 1.0);
  const auto r = fit_beating(s, sp);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_LT(rel(r.period, 2 * kPi / omega), 1e-6);
}

TEST(FitBeating, PoissonPeriodWithinHalfPercent) {
  const SpectralConfig sp;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const auto r = fit_beating(poissonize(beat_series(400.0, 0.98, 0.0, sp), seed), sp);
    ASSERT_TRUE(r.converged) << r.message;
    EXPECT_LT(rel(r.period, 1.25e-12), 0.005) << seed;
  }
}

TEST(FitBeating, ScaleEquivariance) {
  const SpectralConfig sp;
  const auto s = poissonize(beat_series(400.0, 0.95, 0.1, sp), 9);
  const auto a = fit_beating(s, sp);
  ScanSeries t = s;
  for (auto& y : t.y) y *= 4.0;
  for (auto& e : t.y_err) e *= 4.0;
  const auto b = fit_beating(t, sp);
  EXPECT_NEAR(b.visibility, a.visibility, 1e-9);
  EXPECT_NEAR(b.period / a.period, 1.0, 1e-9);
  EXPECT_NEAR(b.phase, a.phase, 1e-9);
}

TEST(FitBeating, Preconditions) {
  const SpectralConfig sp;
  EXPECT_FALSE(fit_beating(beat_series(400.0, 0.9, 0.0, sp, 14), sp).converged);
  EXPECT_FALSE(fit_beating(beat_series(400.0, 0.9, 0.0, sp, 30, 2.0e-12), sp).converged);
}

TEST(Extrema, ConstantSeriesIsZero) {
  ScanSeries s;
  s.x = linspace(0.0, kPi, 9);
  s.y.assign(9, 7.0);
  s.y_err.assign(9, 1.0);
  EXPECT_DOUBLE_EQ(visibility_from_extrema(s, kPi), 0.0);
}

TEST(Extrema, ZeroMinimumIsOne) {
  ScanSeries s = tpi_series(100.0, 1.0, 0.0, TpiBranch::Bunched, 41);
  s.y[20] = 0.0;
  EXPECT_DOUBLE_EQ(visibility_from_extrema(s, kPi), 1.0);
}

TEST(Extrema, SyntheticFringe) {
  const auto s = tpi_series(100.0, 0.98, 0.37, TpiBranch::Bunched, 61);
  EXPECT_NEAR(visibility_from_extrema(s, kPi), 0.98, 2e-3);
}

TEST(Extrema, ShortSpanThrows) {
  const auto s = tpi_series(100.0, 0.98, 0.0, TpiBranch::Bunched, 21, 0.9 * kPi);
  EXPECT_THROW(visibility_from_extrema(s, kPi), std::invalid_argument);
  EXPECT_THROW(visibility_from_extrema(s, 0.0), std::invalid_argument);
}

TEST(SubtractAccidentals, ClampsAtZero) {
  ScanSeries s;
  s.x = {0.0, 1.0};
  s.y = {10.0, 5.0};
  s.y_err = {std::sqrt(10.0), std::sqrt(5.0)};
  s.accidentals = std::vector<double>{2.0, 6.0};
  const auto t = subtract_accidentals(s);
  EXPECT_EQ(t.y, (std::vector<double>{8.0, 0.0}));
  EXPECT_NEAR(t.y_err[0], std::sqrt(12.0), 1e-15);
  EXPECT_NEAR(t.y_err[1], std::sqrt(11.0), 1e-15);
}

TEST(SubtractAccidentals, ZeroIsIdentityAndMissingThrows) {
  ScanSeries s = tpi_series(100.0, 0.5, 0.0, TpiBranch::Bunched);
  EXPECT_THROW(subtract_accidentals(s), std::invalid_argument);
  s.accidentals = std::vector<double>(s.size(), 0.0);
  const auto t = subtract_accidentals(s);
  EXPECT_EQ(t.y, s.y);
  EXPECT_EQ(t.y_err, s.y_err);
}

TEST(SubtractAccidentals, NeverLowersVisibilityBeyondNoise) {
  int worse = 0;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    ScanSeries s = tpi_series(1000.0, 0.99, 0.0, TpiBranch::Bunched);
    for (auto& y : s.y) y += 15.0;
    s = poissonize(s, seed);
    s.accidentals = std::vector<double>(s.size(), 15.0);
    const auto raw = fit_tpi(s, TpiBranch::Bunched);
    const auto sub = fit_tpi(subtract_accidentals(s), TpiBranch::Bunched);
    worse += sub.visibility < raw.visibility - 3 * raw.visibility_err;
    EXPECT_GT(sub.visibility, raw.visibility) << seed;
  }
  EXPECT_EQ(worse, 0);
}

TEST(Bootstrap, AgreesWithCovarianceErrorAndIgnoresWorkers) {
  const auto s = poissonize(tpi_series(2000.0, 0.9, 0.0, TpiBranch::Antibunched), 12);
  const std::function<FitResult(const ScanSeries&)> fit = [](const ScanSeries& x) {
    return fit_tpi(x, TpiBranch::Antibunched);
  };
  const auto r = fit(s);
  const double e1 = bootstrap_visibility_error(s, fit, 200, 5, 1);
  const double e3 = bootstrap_visibility_error(s, fit, 200, 5, 3);
  EXPECT_EQ(e1, e3);
  EXPECT_GT(e1 / r.visibility_err, 0.6);
  EXPECT_LT(e1 / r.visibility_err, 1.6);
}

}  // namespace
