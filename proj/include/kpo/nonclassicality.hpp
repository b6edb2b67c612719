// Copyright 2026 The kpo Authors
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

// Nonclassicality measures: quadrature squeezing, Klyshko coefficients,
// Wigner logarithmic negativity, and the Poissonian-regime formulas.

#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/errors.hpp"
#include "kpo/fock_core.hpp"
#include "kpo/gaussian_po.hpp"

namespace kpo {

inline constexpr double kMeanFieldTol = 1e-8;

/// Minimum quadrature variance, 1/2 + ⟨b†b⟩ − |⟨b²⟩|, of a zero-mean state.
inline double squeezing_s(const DensityMatrix& rho) {
  const HilbertDim dim(rho.dim());
  const Operator b = annihilation(dim);
  if (std::abs(expectation(rho, b)) > kMeanFieldTol) throw NonzeroMeanError("squeezing_s: ⟨b⟩ is not zero");
  const double n = expectation(rho, creation(dim) * b).real();
  return 0.5 + n - std::abs(expectation(rho, b * b));
}

inline double squeezing_from_covariance(const CovarianceMatrix& v) { return v.min_eigenvalue(); }

/// Values below this are treated as zero in Klyshko products.
inline constexpr double kPopulationFloor = 1e-12;

/// B_n = (n+1) ρ_{n−1} ρ_{n+1} − n ρ_n². Negative values certify a
/// nonclassical photon distribution.
inline double klyshko(const std::vector<double>& pops, int n) {
  if (n < 1 || n + 1 >= static_cast<int>(pops.size())) {
    throw IndexError("klyshko: need 1 ≤ n and n + 1 < " + std::to_string(pops.size()));
  }
  auto at = [&](int k) {
    const double v = pops[static_cast<std::size_t>(k)];
    return std::abs(v) < kPopulationFloor ? 0.0 : v;
  };
  return (n + 1) * at(n - 1) * at(n + 1) - n * at(n) * at(n);
}

inline constexpr double kWlnClampTol = 1e-4;
inline constexpr double kWignerNormTol = 1e-3;

/// log ∬|W| dx dp by the trapezoid rule.
inline double wln(const WignerField& field) {
  if (field.boundary_ratio() > kWignerBoundaryTol) {
    throw GridError("wln: |W| on the grid boundary exceeds 1e-6 of the peak");
  }
  const double norm = trapezoid(field.grid, field.values);
  if (std::abs(norm - 1.0) > kWignerNormTol) throw GridError("wln: W integrates to " + std::to_string(norm));
  const double w = std::log(trapezoid(field.grid, field.values.cwiseAbs()));
  if (w < 0.0) {
    if (w < -kWlnClampTol) throw GridError("wln: ∬|W| below 1 beyond grid tolerance");
    return 0.0;
  }
  return w;
}

/// Wigner negativity of a state on its default grid.
inline double wln(const DensityMatrix& rho, int points = 201) { return wln(wigner(rho, default_grid(rho, points))); }

struct PoissonPredictors {
  double n_cav;
  double t_star;
  double rho2_star;
};

/// Mean-field photon number above threshold, and the boxcar width at which
/// the two-photon population of a Poissonian output peaks.
inline PoissonPredictors poisson_predictors(const SystemParams& params) {
  params.validate();
  const double k = params.kerr;
  if (!(k > 0.0)) throw BelowThreshold("poisson_predictors: needs a positive Kerr constant");
  const double bk = std::abs(params.beta) / k;
  const double gk = params.gamma / k;
  const double disc = bk * bk - 0.25 * gk * gk;
  if (!(disc > 0.0)) throw BelowThreshold("poisson_predictors: drive below threshold");
  const double n_cav = 0.5 * std::sqrt(disc);
  return {n_cav, 2.0 / (params.gamma * n_cav), 2.0 * std::exp(-2.0)};
}

inline double poisson_probability(double lambda, int n) {
  if (lambda == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(lambda) - lambda - std::lgamma(n + 1.0));
}

struct PoissonFit {
  double lambda;
  double rms_residual;
};

inline constexpr double kFitSupportFloor = 1e-6;

/// Unweighted least-squares Poisson fit. The residual is the rms over levels
/// where either the data or the model exceeds 1e−6.
inline PoissonFit poisson_fit(const std::vector<double>& pops) {
  if (pops.size() < 2) throw DimensionMismatch("poisson_fit: need at least two populations");
  const int n = static_cast<int>(pops.size());
  auto sse = [&](double lambda) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      const double d = pops[static_cast<std::size_t>(k)] - poisson_probability(lambda, k);
      s += d * d;
    }
    return s;
  };
  double mean = 0.0;
  for (int k = 0; k < n; ++k) mean += k * pops[static_cast<std::size_t>(k)];
  // bracket around the mean, which is the exact answer for Poisson data
  const double hi = std::max(4.0 * mean + 4.0, static_cast<double>(n));
  auto [lambda, best] = boost::math::tools::brent_find_minima(sse, 0.0, hi, 52);
  // a coarse scan guards against a secondary minimum
  for (int i = 0; i <= 200; ++i) {
    const double l = hi * i / 200.0;
    if (sse(l) < best - 1e-15) {
      auto r = boost::math::tools::brent_find_minima(sse, std::max(0.0, l - hi / 200.0), l + hi / 200.0, 52);
      if (r.second < best) std::tie(lambda, best) = r;
    }
  }
  double s = 0.0;
  int used = 0;
  for (int k = 0; k < n; ++k) {
    const double p = pops[static_cast<std::size_t>(k)];
    const double m = poisson_probability(lambda, k);
    if (std::abs(p) > kFitSupportFloor || m > kFitSupportFloor) {
      s += (p - m) * (p - m);
      ++used;
    }
  }
  return {lambda, used > 0 ? std::sqrt(s / used) : 0.0};
}

/// Every measure of one state, in a fixed serialization order.
struct MetricsRecord {
  double s = 0.0;
  std::vector<double> b_n;  // B_1 .. B_{n_max}
  double wln = 0.0;
  double purity = 0.0;
  std::vector<double> populations;
  double n_mean = 0.0;

  double b(int n) const {
    if (n < 1 || n > static_cast<int>(b_n.size())) return std::nan("");
    return b_n[static_cast<std::size_t>(n - 1)];
  }
  double population(int n) const {
    return n < static_cast<int>(populations.size()) ? populations[static_cast<std::size_t>(n)] : 0.0;
  }
};

/// Evaluates all metrics. A state with a nonzero mean field reports s as NaN.
inline MetricsRecord compute_metrics(const DensityMatrix& rho, int wigner_points = 201) {
  MetricsRecord r;
  r.populations = photon_distribution(rho);
  try {
    r.s = squeezing_s(rho);
  } catch (const NonzeroMeanError&) {
    r.s = std::nan("");
  }
  const int n_max = static_cast<int>(r.populations.size()) - 2;
  for (int n = 1; n <= n_max; ++n) r.b_n.push_back(klyshko(r.populations, n));
  r.wln = wln(rho, wigner_points);
  r.purity = purity(rho);
  r.n_mean = mean_photon_number(rho);
  return r;
}

}  // namespace kpo
