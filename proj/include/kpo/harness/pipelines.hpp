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

// Reusable computations behind the figure reproductions: analytic PO curves,
// β scans of the KPO output, two-photon peaks, negativity maps and the
// Klyshko minimum over (β, T).

#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/gaussian_po.hpp"
#include "kpo/harness/sweep.hpp"
#include "kpo/nonclassicality.hpp"
#include "kpo/pulse_io.hpp"

namespace kpo::harness {

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

inline std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> v = linspace(std::log10(a), std::log10(b), n);
  for (auto& x : v) x = std::pow(10.0, x);
  return v;
}

/// a, a+h, ..., up to b inclusive, with values rounded to the step's decimals.
inline std::vector<double> arange(double a, double b, double h) {
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
  for (long i = 0; i <= n; ++i) v.push_back(std::round((a + static_cast<double>(i) * h) * 1e9) / 1e9);
  return v;
}

// ---------------------------------------------------------------------------
// Linear oscillator (analytic)

struct PoOutputPoint {
  double T;
  CovarianceMatrix v;
  double s;
  std::vector<double> populations;
};

/// Boxcar output of the PO at width T: covariance, squeezing and (if
/// n_pop > 0) the reconstructed photon distribution.
inline PoOutputPoint po_output_point(double beta, double T, int n_pop = 0, double gamma = 1.0) {
  const SystemParams p{beta, 0.0, gamma};
  const CovarianceMatrix v = po_output_covariance_boxcar(p, T);
  PoOutputPoint r{T, v, squeezing_from_covariance(v), {}};
  if (n_pop > 0) r.populations = photon_distribution(covariance_to_fock(v, HilbertDim(n_pop)));
  return r;
}

/// Cavity squeezing of the PO, γ/(4β + 2γ).
inline double po_cavity_squeezing(double beta, double gamma = 1.0) {
  return squeezing_from_covariance(po_cavity_covariance(SystemParams{beta, 0.0, gamma}));
}

/// Smallest T at which the output squeezing reaches the cavity value.
inline double po_squeezing_crossing(double beta, double gamma = 1.0) {
  const double target = po_cavity_squeezing(beta, gamma);
  auto gap = [&](double T) { return po_output_point(beta, T, 0, gamma).s - target; };
  double lo = 1e-4, hi = 1e-4;
  while (gap(hi) > 0.0) {
    lo = hi;
    hi *= 1.5;
    if (hi > 1e6) throw NumericalError("po_squeezing_crossing: output never reaches the cavity squeezing");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Population dimension large enough for the PO output at (β, T).
inline int po_population_dim(const CovarianceMatrix& v) {
  const double n = v.mean_photons();
  const double spread = v.max_eigenvalue();
  return std::clamp(static_cast<int>(std::ceil(40.0 + 12.0 * n + 40.0 * spread)), 40, 1200);
}

/// Smallest T at which B_n < 0 for the PO boxcar output.
inline double po_klyshko_onset(double beta, int n = 2, double gamma = 1.0) {
  auto b = [&](double T) {
    const CovarianceMatrix v = po_output_covariance_boxcar(SystemParams{beta, 0.0, gamma}, T);
    return klyshko(photon_distribution(covariance_to_fock(v, HilbertDim(std::max(n + 12, po_population_dim(v))))), n);
  };
  double lo = 1e-3, hi = 1e-3;
  while (b(hi) >= 0.0) {
    lo = hi;
    hi *= 1.25;
    if (hi > 1e4) throw NumericalError("po_klyshko_onset: B_n never becomes negative");
  }
  for (int i = 0; i < 100 && hi - lo > 1e-10 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (b(mid) >= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// KPO scans

struct ScanOptions {
  int workers = 1;
  PointOptions point{};
};

/// Metrics of the output mode for each β at fixed K and filter.
inline std::vector<SweepRecord> beta_scan(double kerr, FilterKind kind, double param, const std::vector<double>& betas,
                                          const ScanOptions& opts = {}, double gamma = 1.0) {
  std::vector<SweepRecord> out(betas.size());
  parallel_for(betas.size(), opts.workers, [&](std::size_t i) {
    SweepRecord& r = out[i];
    r.beta = betas[i];
    r.kerr = kerr;
    r.filter_kind = to_string(kind);
    r.filter_param = param;
    try {
      r.metrics = evaluate_point(SystemParams{betas[i], kerr, gamma}, make_filter(kind, param), opts.point).metrics;
    } catch (const KpoError& e) {
      r.status = error_status(e);
    }
  });
  return out;
}

struct PeakResult {
  double beta;
  MetricsRecord metrics;
  PoissonFit fit;
  std::vector<SweepRecord> scan;
};

/// Maximum over β of the output two-photon population for a boxcar of width
/// T: a scan over `betas` followed by a Brent refinement around the best
/// scan point.
inline PeakResult peak_two_photon(double kerr, double T, const std::vector<double>& betas, const ScanOptions& opts = {},
                                  double gamma = 1.0) {
  PeakResult r;
  r.scan = beta_scan(kerr, FilterKind::boxcar, T, betas, opts, gamma);
  std::size_t best = r.scan.size();
  for (std::size_t i = 0; i < r.scan.size(); ++i)
    if (r.scan[i].ok() && (best == r.scan.size() || r.scan[i].metrics.population(2) > r.scan[best].metrics.population(2)))
      best = i;
  if (best == r.scan.size()) throw NumericalError("peak_two_photon: every scan point failed");
  const double lo = betas[best == 0 ? 0 : best - 1];
  const double hi = betas[std::min(best + 1, betas.size() - 1)];
  r.beta = r.scan[best].beta;
  r.metrics = r.scan[best].metrics;
  const FilterFunction f = make_filter(FilterKind::boxcar, T);
  auto neg_rho2 = [&](double b) {
    try {
      const MetricsRecord m = evaluate_point(SystemParams{b, kerr, gamma}, f, opts.point).metrics;
      if (m.population(2) > r.metrics.population(2)) {
        r.metrics = m;
        r.beta = b;
      }
      return -m.population(2);
    } catch (const KpoError&) {
      return 0.0;
    }
  };
  if (hi > lo) {
    boost::uintmax_t iters = 20;
    boost::math::tools::brent_find_minima(neg_rho2, lo, hi, 20, iters);
  }
  r.fit = poisson_fit(r.metrics.populations);
  return r;
}

/// β scan centred on the Poissonian prediction for the ρ₂ peak, n_cav = 2/(γT).
inline std::vector<double> peak_scan_grid(double kerr, double T, int points = 10, double gamma = 1.0) {
  const double n_cav = 2.0 / (gamma * T);
  const double pred = kerr * std::sqrt(4.0 * n_cav * n_cav + 0.25 * (gamma / kerr) * (gamma / kerr));
  return logspace(0.3 * pred, 2.0 * pred, points);
}

struct KlyshkoMinimum {
  double kerr;
  double beta;
  double T;
  double b2;
};

/// Minimum of B₂ over a (β/K, T) grid, refined by alternating line searches
/// in β and T around the best grid point.
inline KlyshkoMinimum klyshko_minimum(double kerr, const std::vector<double>& beta_over_k, const std::vector<double>& Ts,
                                      const ScanOptions& opts = {}, double gamma = 1.0) {
  struct Cell {
    double beta, T, b2;
  };
  std::vector<Cell> cells;
  for (double T : Ts)
    for (double r : beta_over_k) cells.push_back({r * kerr, T, std::numeric_limits<double>::infinity()});
  parallel_for(cells.size(), opts.workers, [&](std::size_t i) {
    try {
      cells[i].b2 = evaluate_point(SystemParams{cells[i].beta, kerr, gamma}, make_filter(FilterKind::boxcar, cells[i].T), opts.point)
                        .metrics.b(2);
    } catch (const KpoError&) {
    }
  });
  const auto best = *std::min_element(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.b2 < b.b2; });
  KlyshkoMinimum m{kerr, best.beta, best.T, best.b2};

  // coordinate-wise Brent refinement: β, then T, then β again
  auto b2_at = [&](double beta, double T) {
    try {
      const double v = evaluate_point(SystemParams{beta, kerr, gamma}, make_filter(FilterKind::boxcar, T), opts.point).metrics.b(2);
      if (v < m.b2) m = {kerr, beta, T, v};
      return v;
    } catch (const KpoError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const double db = kerr * (beta_over_k.size() > 1 ? beta_over_k[1] - beta_over_k[0] : 0.2 * beta_over_k[0]);
  const double dT = Ts.size() > 1 ? Ts[1] - Ts[0] : 0.5 * Ts[0];
  for (int pass = 0; pass < 3; ++pass) {
    boost::uintmax_t iters = 10;
    if (pass % 2 == 0) {
      const double T = m.T;
      boost::math::tools::brent_find_minima([&](double b) { return b2_at(b, T); }, std::max(1e-3, m.beta - db), m.beta + db, 16,
                                            iters);
    } else {
      const double beta = m.beta;
      boost::math::tools::brent_find_minima([&](double T) { return b2_at(beta, T); }, std::max(0.1, m.T - dT), m.T + dT, 16,
                                            iters);
    }
  }
  return m;
}

}  // namespace kpo::harness
