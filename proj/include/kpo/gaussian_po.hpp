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

// Closed forms for the linear parametric oscillator (K = 0): cavity and
// filtered-output covariances, Gaussian Wigner functions and the Fock-basis
// density matrix of a zero-mean Gaussian state.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/errors.hpp"
#include "kpo/filter.hpp"
#include "kpo/fock_core.hpp"

namespace kpo {

/// Symmetrized quadrature second moments; vacuum is diag(1/2, 1/2).
struct CovarianceMatrix {
  double v11 = 0.5;
  double v22 = 0.5;
  double v12 = 0.0;

  static constexpr double kHeisenbergTol = 1e-9;

  double det() const { return v11 * v22 - v12 * v12; }
  double trace() const { return v11 + v22; }
  Eigen::Matrix2d matrix() const { return (Eigen::Matrix2d() << v11, v12, v12, v22).finished(); }

  double min_eigenvalue() const { return 0.5 * trace() - std::sqrt(0.25 * (v11 - v22) * (v11 - v22) + v12 * v12); }
  double max_eigenvalue() const { return 0.5 * trace() + std::sqrt(0.25 * (v11 - v22) * (v11 - v22) + v12 * v12); }

  /// ⟨b†b⟩ of the zero-mean Gaussian state.
  double mean_photons() const { return 0.5 * trace() - 0.5; }

  void validate() const {
    if (!std::isfinite(v11) || !std::isfinite(v22) || !std::isfinite(v12)) throw InvalidState("CovarianceMatrix: non-finite entry");
    if (!(v11 > 0.0) || !(v22 > 0.0)) throw InvalidState("CovarianceMatrix: variances must be positive");
    if (det() < 0.25 - kHeisenbergTol) throw InvalidState("CovarianceMatrix: det V = " + std::to_string(det()) + " violates det V ≥ 1/4");
  }

  /// Covariance after the phase-space rotation b → b e^{−iθ}.
  CovarianceMatrix rotated(double theta) const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    const Eigen::Matrix2d m = r * matrix() * r.transpose();
    return {m(0, 0), m(1, 1), m(0, 1)};
  }

  static CovarianceMatrix vacuum() { return {}; }
  /// Squeezed vacuum S(r e^{iθ})|0⟩.
  static CovarianceMatrix squeezed_vacuum(double r, double theta = 0.0) {
    return CovarianceMatrix{0.5 * std::exp(-2.0 * r), 0.5 * std::exp(2.0 * r), 0.0}.rotated(0.5 * theta);
  }
};

/// Quadrature covariance of a state, built from ⟨b†b⟩, ⟨b²⟩ and ⟨b⟩:
/// V11 = n + 1/2 + Re m, V22 = n + 1/2 − Re m, V12 = Im m (central moments).
inline CovarianceMatrix covariance_of(const Eigen::MatrixXcd& rho) {
  const HilbertDim dim(static_cast<int>(rho.rows()));
  const Operator b = annihilation(dim);
  const cplx mean = expectation(rho, b);
  const double n = expectation(rho, creation(dim) * b).real() - std::norm(mean);
  const cplx m = expectation(rho, b * b) - mean * mean;
  return {n + 0.5 + m.real(), n + 0.5 - m.real(), m.imag()};
}

inline CovarianceMatrix covariance_of(const DensityMatrix& rho) { return covariance_of(rho.matrix()); }

// ---------------------------------------------------------------------------
// Linear parametric oscillator

/// Normal modes of the drift A = [[−γ/2, −β], [−β, −γ/2]]: u = (x+p)/√2
/// relaxes at κ_u = γ/2 + β and v = (x−p)/√2 at κ_v = γ/2 − β.
struct PoModes {
  double kappa_u, kappa_v;
  double var_u, var_v;  // steady-state variances γ/(4κ)
};

inline PoModes po_modes(const SystemParams& params) {
  params.validate();
  if (params.kerr != 0.0) throw ConfigError("gaussian_po: closed forms need kerr = 0");
  if (params.beta.imag() != 0.0) throw ConfigError("gaussian_po: closed forms assume a real drive");
  const double beta = params.beta.real();
  const double g = params.gamma;
  if (std::abs(beta) >= 0.5 * g) throw ThresholdError("gaussian_po: |beta| must be below gamma/2");
  const double ku = 0.5 * g + beta;
  const double kv = 0.5 * g - beta;
  return {ku, kv, g / (4.0 * ku), g / (4.0 * kv)};
}

namespace detail {

inline CovarianceMatrix from_uv(double vu, double vv) { return {0.5 * (vu + vv), 0.5 * (vu + vv), 0.5 * (vu - vv)}; }

// (x − 1 + e^{−x}) / x², stable for small x.
inline double ou_phi(double x) {
  if (std::abs(x) < 1e-3) return 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
  return (x + std::expm1(-x)) / (x * x);
}

// (1 − e^{−x}) / x
inline double ou_psi(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return -std::expm1(-x) / x;
}

}  // namespace detail

inline CovarianceMatrix po_cavity_covariance(const SystemParams& params) {
  const PoModes m = po_modes(params);
  return detail::from_uv(m.var_u, m.var_v);
}

/// ∫∫ f(t) f(t') e^{−κ|t−t'|} dt dt'. Exact for piecewise-constant profiles;
/// linear profiles are refined into 32 constant sub-cells per interval.
inline double ou_filter_integral(double kappa, const FilterFunction& f) {
  const TimeGrid& g = f.grid();
  const int sub = f.interpolation() == Interpolation::piecewise_constant ? 1 : 32;
  const double h = g.dt() / sub;
  const double x = kappa * h;
  const double same = 2.0 * h * h * detail::ou_phi(x);  // ∫∫ over one cell
  const double q = h * detail::ou_psi(x);               // ∫ e^{−κ(cell end − s)} ds over one cell
  const double decay = std::exp(-x);
  double carry = 0.0;  // Σ_{i<j} f_i e^{−κ(t_j − t_{i+1})} q
  double total = 0.0;
  for (int i = 0; i < g.n_steps; ++i) {
    for (int s = 0; s < sub; ++s) {
      const double v = f.value(g.time(i) + (s + 0.5) * h);
      total += v * v * same + 2.0 * v * q * carry;
      carry = decay * carry + v * q;
    }
  }
  return total;
}

/// Output-mode covariance for an arbitrary real filter:
/// V_U = 1/2 + γ (V_u − 1/2) ∫∫ f f e^{−κ_u|t−t'|}, likewise for v.
inline CovarianceMatrix po_output_covariance(const SystemParams& params, const FilterFunction& f) {
  const PoModes m = po_modes(params);
  const double vu = 0.5 + params.gamma * (m.var_u - 0.5) * ou_filter_integral(m.kappa_u, f);
  const double vv = 0.5 + params.gamma * (m.var_v - 0.5) * ou_filter_integral(m.kappa_v, f);
  return detail::from_uv(vu, vv);
}

/// Boxcar of width T: ∫∫ = (2/T)(T/κ − (1 − e^{−κT})/κ²).
inline CovarianceMatrix po_output_covariance_boxcar(const SystemParams& params, double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("po_output_covariance_boxcar: T must be positive");
  const PoModes m = po_modes(params);
  auto integral = [T](double k) { return 2.0 * T * detail::ou_phi(k * T); };
  const double vu = 0.5 + params.gamma * (m.var_u - 0.5) * integral(m.kappa_u);
  const double vv = 0.5 + params.gamma * (m.var_v - 0.5) * integral(m.kappa_v);
  return detail::from_uv(vu, vv);
}

// ---------------------------------------------------------------------------
// Gaussian Wigner function

inline constexpr double kSingularDet = 1e-12;

/// exp(−½ vᵀV⁻¹v) / (2π√det V); integrates to one and gives 1/π for vacuum.
inline double gaussian_wigner_point(const CovarianceMatrix& v, double x, double p) {
  const double d = v.det();
  if (!(d >= kSingularDet)) throw SingularCovariance("gaussian_wigner: det V below 1e-12");
  const double q = (v.v22 * x * x - 2.0 * v.v12 * x * p + v.v11 * p * p) / d;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(d));
}

inline WignerField gaussian_wigner(const CovarianceMatrix& v, const QuadratureGrid& grid) {
  grid.validate();
  if (!(v.det() >= kSingularDet)) throw SingularCovariance("gaussian_wigner: det V below 1e-12");
  WignerField field{grid, Eigen::MatrixXd(grid.n_x, grid.n_p)};
  for (int i = 0; i < grid.n_x; ++i)
    for (int j = 0; j < grid.n_p; ++j) field.values(i, j) = gaussian_wigner_point(v, grid.x(i), grid.p(j));
  return field;
}

// ---------------------------------------------------------------------------
// Covariance → Fock density matrix

struct HermiteRMatrix {
  cplx r11, r22, r12;
};

/// R for a zero-mean Gaussian state; R11 = (V22 − V11 − 2iV12)/(2d + t + ½),
/// R22 = R11*, R12 = (½ − 2d)/(2d + t + ½) with d = det V, t = tr V.
inline HermiteRMatrix hermite_r_matrix(const CovarianceMatrix& v) {
  const double d = v.det();
  const double den = 2.0 * d + v.trace() + 0.5;
  const cplx r11 = cplx(v.v22 - v.v11, -2.0 * v.v12) / den;
  return {r11, std::conj(r11), cplx((0.5 - 2.0 * d) / den, 0.0)};
}

namespace detail {

// Σ_k (−2R12)^k/k! · (−R11)^a/a! · (−R22)^b/b!, a = (m−k)/2, b = (n−k)/2,
// summed over k with m−k and n−k even, times exp(log_prefactor). Terms are
// formed from log magnitudes and accumulated relative to the largest; a
// cancellation worse than 1e12 is redone in extended precision.
template <class Real>
std::complex<Real> hermite_sum(const HermiteRMatrix& r, int m, int n, Real log_prefactor, Real* cancellation) {
  using C = std::complex<Real>;
  const C a11 = -C(static_cast<Real>(r.r11.real()), static_cast<Real>(r.r11.imag()));
  const C a22 = -C(static_cast<Real>(r.r22.real()), static_cast<Real>(r.r22.imag()));
  const C a12 = Real(-2) * C(static_cast<Real>(r.r12.real()), static_cast<Real>(r.r12.imag()));
  std::vector<Real> logs;
  std::vector<C> phases;
  for (int k = std::min(m, n); k >= 0; --k) {
    if ((m - k) % 2 != 0 || (n - k) % 2 != 0) continue;
    const int a = (m - k) / 2;
    const int b = (n - k) / 2;
    if ((k > 0 && std::abs(a12) == Real(0)) || (a > 0 && std::abs(a11) == Real(0)) || (b > 0 && std::abs(a22) == Real(0))) continue;
    Real lg = -std::lgamma(Real(k + 1)) - std::lgamma(Real(a + 1)) - std::lgamma(Real(b + 1));
    C ph(1);
    if (k > 0) {
      lg += k * std::log(std::abs(a12));
      ph *= std::polar(Real(1), k * std::arg(a12));
    }
    if (a > 0) {
      lg += a * std::log(std::abs(a11));
      ph *= std::polar(Real(1), a * std::arg(a11));
    }
    if (b > 0) {
      lg += b * std::log(std::abs(a22));
      ph *= std::polar(Real(1), b * std::arg(a22));
    }
    logs.push_back(lg);
    phases.push_back(ph);
  }
  if (logs.empty()) {
    if (cancellation) *cancellation = 1;
    return C(0);
  }
  Real top = logs[0];
  for (Real l : logs) top = std::max(top, l);
  C sum(0);
  Real mag = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const Real w = std::exp(logs[i] - top);
    sum += w * phases[i];
    mag += w;
  }
  if (cancellation) *cancellation = std::abs(sum) > 0 ? mag / std::abs(sum) : std::numeric_limits<Real>::infinity();
  return sum * std::exp(top + log_prefactor);
}

inline cplx hermite_sum_checked(const HermiteRMatrix& r, int m, int n, double log_prefactor) {
  double cancel = 1.0;
  const cplx v = hermite_sum<double>(r, m, n, log_prefactor, &cancel);
  if (cancel <= 1e12) return v;
  long double cl = 1.0L;
  const auto w = hermite_sum<long double>(r, m, n, static_cast<long double>(log_prefactor), &cl);
  return {static_cast<double>(w.real()), static_cast<double>(w.imag())};
}

}  // namespace detail

/// Two-variable Hermite polynomial H^{R}_{mn}(0, 0).
inline cplx hermite_2d(const HermiteRMatrix& r, int m, int n) {
  if (m < 0 || n < 0) throw IndexError("hermite_2d: indices must be non-negative");
  const double logp = std::lgamma(m + 1.0) + std::lgamma(n + 1.0) - 0.5 * (m + n) * std::log(2.0);
  return detail::hermite_sum_checked(r, m, n, logp);
}

inline constexpr double kReconstructionTraceTol = 1e-6;

/// ⟨m|ρ|n⟩ = (d + t/2 + ¼)^{−1/2} H^{R}_{mn}(0,0) / √(m! n!) for a zero-mean
/// Gaussian state, renormalized after checking the truncated weight.
inline DensityMatrix covariance_to_fock(const CovarianceMatrix& v, HilbertDim dim) {
  v.validate();
  const HermiteRMatrix r = hermite_r_matrix(v);
  const double log_norm = -0.5 * std::log(v.det() + 0.5 * v.trace() + 0.25);
  const int n = dim.value();
  Eigen::MatrixXcd rho(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double logp = log_norm + 0.5 * (std::lgamma(i + 1.0) + std::lgamma(j + 1.0)) - 0.5 * (i + j) * std::log(2.0);
      rho(i, j) = detail::hermite_sum_checked(r, i, j, logp);
      rho(j, i) = std::conj(rho(i, j));
    }
  }
  const double tr = rho.trace().real();
  if (1.0 - tr > kReconstructionTraceTol) {
    throw TruncationError("covariance_to_fock: truncated weight " + std::to_string(1.0 - tr) + " exceeds 1e-6");
  }
  return DensityMatrix::from_hermitian_part(rho / tr);
}

// ---------------------------------------------------------------------------
// Filtered coherent states

struct FilteredMoments {
  cplx mean;
  double photons;
};

/// ⟨A_f⟩ = √γ ⟨c⟩ ∫f dt and ⟨A_f†A_f⟩ = γ |⟨c⟩|² (∫f dt)² for a coherent cavity field.
inline FilteredMoments filtered_coherent_moments(cplx c_ss, const FilterFunction& f, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("filtered_coherent_moments: gamma must be ≥ 0");
  const double area = f.integral();
  return {std::sqrt(gamma) * c_ss * area, gamma * std::norm(c_ss) * area * area};
}

}  // namespace kpo
