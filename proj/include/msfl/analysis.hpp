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

// Weighted least-squares fringe fitting for two-photon-interference scans
// (y = A(1 +- V cos(2 phi + phi0))) and quantum-beating scans
// (y = C(1 - V sinc(sigma t) cos(Omega t + phi0))), plus model-free
// visibility and accidental subtraction.
//
// Fits start from a coarse grid over the phase (and beat frequency), solve
// the remaining linear amplitudes exactly at each grid point, then refine all
// parameters by Gauss-Newton with step halving. Uncertainties come from the
// inverse normal matrix scaled by the reduced chi-square.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "msfl/biphoton.hpp"
#include "msfl/diagnostics.hpp"
#include "msfl/parallel.hpp"
#include "msfl/random.hpp"

namespace msfl {

struct ScanSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_err;
  std::optional<std::vector<double>> accidentals;

  /// Count data with Poisson errors sqrt(max(y, 1)).
  static ScanSeries from_counts(std::vector<double> x, std::vector<double> y,
                                std::optional<std::vector<double>> accidentals = std::nullopt) {
    ScanSeries s;
    s.y_err.reserve(y.size());
    for (double v : y) s.y_err.push_back(std::sqrt(std::max(v, 1.0)));
    s.x = std::move(x);
    s.y = std::move(y);
    s.accidentals = std::move(accidentals);
    s.validate();
    return s;
  }

  std::size_t size() const { return x.size(); }

  void validate() const {
    Checker c;
    c.require(y.size() == x.size() && y_err.size() == x.size(), "scan series x, y, y_err lengths differ");
    c.require(!accidentals || accidentals->size() == x.size(), "scan series accidentals length differs");
    c.require(std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }),
              "scan series x must be finite");
    c.require(std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v) && v >= 0.0; }),
              "scan series y must be finite and >= 0");
    c.require(std::all_of(y_err.begin(), y_err.end(), [](double v) { return std::isfinite(v) && v > 0.0; }),
              "scan series y_err must be finite and > 0");
    if (accidentals)
      c.require(std::all_of(accidentals->begin(), accidentals->end(),
                             [](double v) { return std::isfinite(v) && v >= 0.0; }),
                "scan series accidentals must be finite and >= 0");
    c.throw_if_failed();
  }

  double span() const {
    if (x.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *hi - *lo;
  }
};

struct FitResult {
  double visibility = std::numeric_limits<double>::quiet_NaN();
  double visibility_err = std::numeric_limits<double>::quiet_NaN();
  double period = std::numeric_limits<double>::quiet_NaN();  // rad in phi_p for TPI, s for beating
  double phase = std::numeric_limits<double>::quiet_NaN();
  double offset = std::numeric_limits<double>::quiet_NaN();
  double residual_rms = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  double chi2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> residuals;  // y - model
  std::string message;
};

enum class TpiBranch { Bunched, Antibunched };

inline constexpr std::size_t kMinTpiPoints = 5;
inline constexpr std::size_t kMinBeatingPoints = 15;
/// Minimum phi_p coverage for a TPI fit: 0.9 of half a fringe (pi/2 in phi_p).
inline constexpr double kMinTpiSpan = 0.45 * std::numbers::pi;

namespace detail {

inline double wrap_phase(double p) {
  double w = std::remainder(p, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

struct GaussNewtonOutcome {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // unscaled (J^T W J)^-1
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  bool singular = false;
};

/// `model(i, p, grad)` returns the model value at sample i and fills its
/// gradient with respect to p.
template <class Model>
GaussNewtonOutcome gauss_newton(const Model& model, std::size_t n, const std::vector<double>& y,
                                const std::vector<double>& w, Eigen::VectorXd p, int max_iter = 100,
                                double rtol = 1e-10) {
  const Eigen::Index k = p.size();
  Eigen::VectorXd grad(k);
  auto chi2_at = [&](const Eigen::VectorXd& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - model(i, q, grad);
      s += w[i] * r * r;
    }
    return s;
  };
  auto normal_at = [&](const Eigen::VectorXd& q, Eigen::MatrixXd& a, Eigen::VectorXd& b) {
    a.setZero(k, k);
    b.setZero(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - model(i, q, grad);
      a.noalias() += w[i] * grad * grad.transpose();
      b.noalias() += w[i] * r * grad;
    }
  };

  GaussNewtonOutcome out;
  double chi2 = chi2_at(p);
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    normal_at(p, a, b);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
      out.singular = true;
      break;
    }
    const Eigen::VectorXd step = lu.solve(b);
    double lambda = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_chi2 = chi2;
    for (int h = 0; h < 40; ++h, lambda *= 0.5) {
      trial = p + lambda * step;
      trial_chi2 = chi2_at(trial);
      if (trial_chi2 <= chi2) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No decrease along a descent direction: stationary to within rounding.
      out.converged = true;
      break;
    }
    double rel = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      rel = std::max(rel, std::abs(trial(j) - p(j)) / std::max(std::abs(p(j)), 1.0));
    p = trial;
    chi2 = trial_chi2;
    if (rel < rtol) {
      out.converged = true;
      break;
    }
  }
  normal_at(p, a, b);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (lu.isInvertible()) {
    out.covariance = lu.inverse();
  } else {
    out.singular = true;
    out.covariance = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  }
  out.params = p;
  out.chi2 = chi2;
  if (out.singular) out.converged = false;
  return out;
}

struct LinearPair {
  double a = 0.0;  // coefficient of basis 1
  double b = 0.0;  // coefficient of basis 2
  double chi2 = std::numeric_limits<double>::infinity();
  bool ok = false;
};

/// Weighted least squares for y ~ a*u + b*v.
inline LinearPair solve_two(const std::vector<double>& u, const std::vector<double>& v,
                            const std::vector<double>& y, const std::vector<double>& w) {
  double suu = 0, suv = 0, svv = 0, suy = 0, svy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    suu += w[i] * u[i] * u[i];
    suv += w[i] * u[i] * v[i];
    svv += w[i] * v[i] * v[i];
    suy += w[i] * u[i] * y[i];
    svy += w[i] * v[i] * y[i];
  }
  const double det = suu * svv - suv * suv;
  LinearPair out;
  if (!(std::abs(det) > 1e-14 * suu * svv)) return out;
  out.a = (svv * suy - suv * svy) / det;
  out.b = (suu * svy - suv * suy) / det;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - out.a * u[i] - out.b * v[i];
    chi2 += w[i] * r * r;
  }
  out.chi2 = chi2;
  out.ok = true;
  return out;
}

struct GridPick {
  double phase = 0.0;
  double scale = 1.0;  // frequency multiplier for beating
  LinearPair lin;
};

/// Keeps the best candidate; non-negative visibility preferred, then lower
/// chi-square, then smaller |phase|.
inline void consider(GridPick& best, bool& have, const GridPick& cand) {
  if (!cand.lin.ok || !(cand.lin.a > 0.0)) return;
  const bool cand_pos = cand.lin.b >= 0.0;
  if (!have) {
    best = cand;
    have = true;
    return;
  }
  const bool best_pos = best.lin.b >= 0.0;
  if (cand_pos != best_pos) {
    if (cand_pos) best = cand;
    return;
  }
  const double tol = 1e-12 * std::max(best.lin.chi2, 1e-300);
  if (cand.lin.chi2 < best.lin.chi2 - tol ||
      (std::abs(cand.lin.chi2 - best.lin.chi2) <= tol && std::abs(cand.phase) < std::abs(best.phase)))
    best = cand;
}

inline std::vector<double> weights(const ScanSeries& s) {
  std::vector<double> w(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) w[i] = 1.0 / (s.y_err[i] * s.y_err[i]);
  return w;
}

template <class Model>
void finish(FitResult& r, const GaussNewtonOutcome& gn, const ScanSeries& s, const Model& model,
            Eigen::Index visibility_index) {
  const std::size_t n = s.size();
  const auto dof = static_cast<double>(n) - static_cast<double>(gn.params.size());
  Eigen::VectorXd grad(gn.params.size());
  r.residuals.resize(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.residuals[i] = s.y[i] - model(i, gn.params, grad);
    ss += r.residuals[i] * r.residuals[i];
  }
  r.residual_rms = std::sqrt(ss / static_cast<double>(n));
  r.chi2 = gn.chi2;
  r.iterations = gn.iterations;
  const double scale = dof > 0 ? gn.chi2 / dof : 0.0;
  r.visibility_err = std::sqrt(std::max(0.0, gn.covariance(visibility_index, visibility_index) * scale));
  r.converged = gn.converged && std::isfinite(r.visibility) && r.visibility >= -0.05 && r.visibility <= 1.05;
  if (!gn.converged) r.message = gn.singular ? "singular normal equations" : "iteration limit reached";
  else if (!r.converged) r.message = "visibility outside [-0.05, 1.05]";
}

}  // namespace detail

/// Fits A(1 + V cos(2 phi_p + phi0)) for the bunched branch and
/// A(1 - V cos(2 phi_p + phi0)) for the anti-bunched branch; x is phi_p in rad.
inline FitResult fit_tpi(const ScanSeries& series, TpiBranch branch) {
  series.validate();
  FitResult r;
  r.period = std::numbers::pi;
  if (series.size() < kMinTpiPoints) {
    r.message = fmt::format("need at least {} points", kMinTpiPoints);
    return r;
  }
  if (series.span() < kMinTpiSpan) {
    r.message = "phi_p span below half a fringe period";
    return r;
  }
  const double sign = branch == TpiBranch::Bunched ? 1.0 : -1.0;
  const std::size_t n = series.size();
  const auto w = detail::weights(series);

  const std::vector<double> ones(n, 1.0);
  std::vector<double> basis(n);
  detail::GridPick best;
  bool have = false;
  constexpr int kSteps = 720;
  for (int k = -kSteps / 2 + 1; k <= kSteps / 2; ++k) {
    const double phase = 2.0 * std::numbers::pi * k / kSteps;
    for (std::size_t i = 0; i < n; ++i) basis[i] = sign * std::cos(2.0 * series.x[i] + phase);
    detail::consider(best, have, {phase, 1.0, detail::solve_two(ones, basis, series.y, w)});
  }
  if (!have) {
    r.message = "no admissible starting point (singular linear problem)";
    return r;
  }

  auto model = [&](std::size_t i, const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    const double arg = 2.0 * series.x[i] + p(2);
    const double c = std::cos(arg), s = std::sin(arg);
    g(0) = 1.0 + sign * p(1) * c;
    g(1) = sign * p(0) * c;
    g(2) = -sign * p(0) * p(1) * s;
    return p(0) * g(0);
  };
  Eigen::VectorXd p0(3);
  p0 << best.lin.a, best.lin.b / best.lin.a, best.phase;
  const auto gn = detail::gauss_newton(model, n, series.y, w, p0);

  r.offset = gn.params(0);
  r.visibility = gn.params(1);
  r.phase = detail::wrap_phase(gn.params(2));
  detail::finish(r, gn, series, model, 1);
  return r;
}

/// Fits C(1 - V sinc(sigma t) cos(Omega t + phi0)) with sigma fixed from
/// `spectral` and Omega seeded at 2 pi spacing; x is the delay in s.
inline FitResult fit_beating(const ScanSeries& series, const SpectralConfig& spectral) {
  series.validate();
  spectral.validate();
  FitResult r;
  if (series.size() < kMinBeatingPoints) {
    r.message = fmt::format("need at least {} points", kMinBeatingPoints);
    return r;
  }
  if (series.span() < 2.0 * spectral.beat_period()) {
    r.message = "delay span below two beat periods";
    return r;
  }
  const std::size_t n = series.size();
  const auto w = detail::weights(series);
  const double omega0 = spectral.beat_angular_frequency();

  // Work in t = omega0 * x so every parameter is O(1).
  std::vector<double> t(n), env(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = omega0 * series.x[i];
    env[i] = sinc(spectral.sigma * series.x[i]);
  }

  const std::vector<double> ones(n, 1.0);
  std::vector<double> basis(n);
  detail::GridPick best;
  bool have = false;
  constexpr int kPhaseSteps = 720;
  constexpr int kFreqSteps = 41;
  for (int f = 0; f < kFreqSteps; ++f) {
    const double scale = 0.9 + 0.2 * f / (kFreqSteps - 1);
    for (int k = -kPhaseSteps / 2 + 1; k <= kPhaseSteps / 2; ++k) {
      const double phase = 2.0 * std::numbers::pi * k / kPhaseSteps;
      for (std::size_t i = 0; i < n; ++i) basis[i] = -env[i] * std::cos(scale * t[i] + phase);
      detail::GridPick cand{phase, scale, detail::solve_two(ones, basis, series.y, w)};
      // Equal chi-square: prefer the frequency closest to the seed.
      if (have && cand.lin.ok && std::abs(cand.lin.chi2 - best.lin.chi2) <= 1e-12 * best.lin.chi2 &&
          std::abs(cand.scale - 1.0) > std::abs(best.scale - 1.0))
        continue;
      detail::consider(best, have, cand);
    }
  }
  if (!have) {
    r.message = "no admissible starting point (singular linear problem)";
    return r;
  }

  auto model = [&](std::size_t i, const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    const double arg = p(2) * t[i] + p(3);
    const double c = std::cos(arg), s = std::sin(arg);
    g(0) = 1.0 - p(1) * env[i] * c;
    g(1) = -p(0) * env[i] * c;
    g(2) = p(0) * p(1) * env[i] * s * t[i];
    g(3) = p(0) * p(1) * env[i] * s;
    return p(0) * g(0);
  };
  Eigen::VectorXd p0(4);
  p0 << best.lin.a, best.lin.b / best.lin.a, best.scale, best.phase;
  const auto gn = detail::gauss_newton(model, n, series.y, w, p0);

  r.offset = gn.params(0);
  r.visibility = gn.params(1);
  r.period = 2.0 * std::numbers::pi / (gn.params(2) * omega0);
  r.phase = detail::wrap_phase(gn.params(3));
  detail::finish(r, gn, series, model, 1);
  return r;
}

/// (max - min)/(max + min) of the series, with interior extrema refined by a
/// parabola through the extreme sample and its neighbours. `period` is the
/// fringe period in x units; at least one full period must be sampled.
inline double visibility_from_extrema(const ScanSeries& series, double period) {
  series.validate();
  if (!(period > 0.0)) throw std::invalid_argument("period must be > 0");
  if (series.size() < 3 || series.span() < period * (1.0 - 1e-12))
    throw std::invalid_argument("series spans less than one fringe period");

  std::vector<std::size_t> order(series.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return series.x[a] < series.x[b]; });
  std::vector<double> xs, ys;
  for (auto i : order) {
    xs.push_back(series.x[i]);
    ys.push_back(series.y[i]);
  }

  auto refine = [&](std::size_t i) {
    if (i == 0 || i + 1 == xs.size()) return ys[i];
    const double x0 = xs[i - 1], x1 = xs[i], x2 = xs[i + 1];
    const double y0 = ys[i - 1], y1 = ys[i], y2 = ys[i + 1];
    const double d0 = (y1 - y0) / (x1 - x0);
    const double d1 = (y2 - y1) / (x2 - x1);
    const double curv = (d1 - d0) / (x2 - x0);  // half the second derivative
    if (curv == 0.0) return y1;
    // vertex of y1 + d01 (x - x1) + curv (x - x1)(x - x0)
    const double xv = 0.5 * (x0 + x1) - d0 / (2.0 * curv);
    const double val = y1 + d0 * (xv - x1) + curv * (xv - x1) * (xv - x0);
    return val;
  };

  const auto imax = static_cast<std::size_t>(std::max_element(ys.begin(), ys.end()) - ys.begin());
  const auto imin = static_cast<std::size_t>(std::min_element(ys.begin(), ys.end()) - ys.begin());
  const double hi = std::max(refine(imax), ys[imax]);
  const double lo = std::max(0.0, std::min(refine(imin), ys[imin]));
  if (hi + lo <= 0.0) return 0.0;
  return (hi - lo) / (hi + lo);
}

/// y - accidentals clamped at zero; errors add the accidental Poisson
/// uncertainty sqrt(acc) in quadrature.
inline ScanSeries subtract_accidentals(const ScanSeries& series) {
  series.validate();
  if (!series.accidentals) throw std::invalid_argument("series carries no accidental estimates");
  ScanSeries out = series;
  const auto& acc = *series.accidentals;
  for (std::size_t i = 0; i < series.size(); ++i) {
    out.y[i] = std::max(0.0, series.y[i] - acc[i]);
    out.y_err[i] = std::sqrt(series.y_err[i] * series.y_err[i] + acc[i]);
  }
  return out;
}

/// Parametric bootstrap of the visibility: resamples y from the fitted curve
/// with Gaussian noise of width y_err (clamped at 0) and returns the spread of
/// the refitted visibilities.
template <class Fitter>
double bootstrap_visibility_error(const ScanSeries& series, const Fitter& fit, std::size_t resamples = 200,
                                  std::uint64_t seed = 1, unsigned workers = 1) {
  const FitResult base = fit(series);
  if (base.residuals.size() != series.size()) throw std::invalid_argument("base fit produced no residuals");
  std::vector<double> fitted(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) fitted[i] = series.y[i] - base.residuals[i];

  std::vector<double> v(resamples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(resamples, workers, [&](std::size_t k) {
    random::Philox4x32 g(seed, static_cast<std::uint32_t>(k), 0, 0x300u);
    ScanSeries s = series;
    for (std::size_t i = 0; i < s.size(); ++i)
      s.y[i] = std::max(0.0, fitted[i] + series.y_err[i] * random::standard_normal(g));
    const FitResult f = fit(s);
    if (f.converged) v[k] = f.visibility;
  });
  double sum = 0.0, sum2 = 0.0;
  std::size_t m = 0;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    sum += x;
    sum2 += x * x;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = sum / m;
  return std::sqrt(std::max(0.0, (sum2 - m * mean * mean) / (m - 1)));
}

}  // namespace msfl
