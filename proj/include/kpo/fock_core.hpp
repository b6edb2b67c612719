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

// Truncated Fock-space algebra for a single bosonic mode: ladder operators,
// the Kerr parametric oscillator Hamiltonian, reference states and the
// Wigner function of an arbitrary density matrix.
//
// Quadrature convention used throughout the library:
//   x = (b + b†)/√2,  p = i(b† − b)/√2,  vacuum variance 1/2,  ∫W dx dp = 1.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "kpo/errors.hpp"

namespace kpo {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Number of Fock states kept, |0⟩ … |n−1⟩.
class HilbertDim {
 public:
  explicit HilbertDim(int n) : n_(n) {
    if (n < 2) throw ConfigError("HilbertDim: truncation must keep at least 2 Fock states");
  }
  int value() const { return n_; }
  operator int() const { return n_; }  // NOLINT(google-explicit-constructor)

 private:
  int n_;
};

// ---------------------------------------------------------------------------
// Operators

inline Operator annihilation(HilbertDim dim) {
  const int n = dim;
  Operator c = Operator::Zero(n, n);
  for (int k = 1; k < n; ++k) c(k - 1, k) = std::sqrt(static_cast<double>(k));
  return c;
}

inline Operator creation(HilbertDim dim) { return annihilation(dim).adjoint(); }

inline Operator number_operator(HilbertDim dim) {
  const int n = dim;
  Operator m = Operator::Zero(n, n);
  for (int k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
  return m;
}

inline Operator identity(HilbertDim dim) { return Operator::Identity(dim, dim); }

/// Photon-number parity (−1)^n̂.
inline Operator parity_operator(HilbertDim dim) {
  const int n = dim;
  Operator m = Operator::Zero(n, n);
  for (int k = 0; k < n; ++k) m(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return m;
}

/// H = (β c†² + β* c²)/2 + K c†² c², built elementwise so the truncated matrix
/// is exactly Hermitian.
inline Operator kpo_hamiltonian(cplx beta, double kerr, HilbertDim dim) {
  const int n = dim;
  Operator h = Operator::Zero(n, n);
  for (int k = 0; k < n; ++k) h(k, k) = kerr * static_cast<double>(k) * static_cast<double>(k - 1);
  for (int k = 2; k < n; ++k) {
    const double amp = 0.5 * std::sqrt(static_cast<double>(k) * static_cast<double>(k - 1));
    h(k, k - 2) = beta * amp;             // ⟨k|c†²|k−2⟩
    h(k - 2, k) = std::conj(beta) * amp;  // ⟨k−2|c²|k⟩
  }
  return h;
}

// ---------------------------------------------------------------------------
// Density matrices

/// Hermitian, positive semidefinite, unit-trace matrix. Construction validates
/// the invariants; the tolerances match what adaptive integration delivers.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-9;
  static constexpr double kEigenTol = 1e-9;

  explicit DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) { validate(); }

  /// Builds from a matrix that is only approximately Hermitian (integrator
  /// output): symmetrizes first, then validates.
  static DensityMatrix from_hermitian_part(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    return DensityMatrix(std::move(h));
  }

  static DensityMatrix pure(const Eigen::VectorXcd& psi) {
    const double nrm = psi.norm();
    if (!(nrm > 0.0)) throw InvalidState("DensityMatrix::pure: zero state vector");
    Eigen::VectorXcd v = psi / nrm;
    return DensityMatrix(v * v.adjoint());
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

 private:
  void validate() const {
    if (m_.rows() != m_.cols() || m_.rows() < 1) throw InvalidState("DensityMatrix: matrix must be square");
    if (!m_.allFinite()) throw InvalidState("DensityMatrix: non-finite entries");
    const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol) throw InvalidState("DensityMatrix: not Hermitian (" + std::to_string(herm) + ")");
    const cplx tr = m_.trace();
    if (std::abs(tr - 1.0) > kTraceTol) throw InvalidState("DensityMatrix: trace " + std::to_string(tr.real()) + " != 1");
    for (int k = 0; k < m_.rows(); ++k) {
      const double p = m_(k, k).real();
      if (p < -kEigenTol || p > 1.0 + kEigenTol) throw InvalidState("DensityMatrix: population outside [0,1]");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kEigenTol) {
      throw InvalidState("DensityMatrix: negative eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
    }
  }

  Eigen::MatrixXcd m_;
};

// ---------------------------------------------------------------------------
// Reference states

struct FockKind {
  int n;
};
struct CoherentKind {
  cplx alpha;
};
/// Squeezed vacuum S(ξ)|0⟩ with S(ξ) = exp[(ξ* b² − ξ b†²)/2], ξ = r e^{iθ}.
struct SqueezedVacuumKind {
  double r;
  double theta = 0.0;
};
struct ThermalKind {
  double nbar;
};
using ReferenceKind = std::variant<FockKind, CoherentKind, SqueezedVacuumKind, ThermalKind>;

inline constexpr double kReferenceTailTol = 1e-8;

namespace detail {

inline DensityMatrix normalized_pure(Eigen::VectorXcd psi, double full_norm2, const char* what) {
  const double kept = psi.squaredNorm();
  if (full_norm2 - kept >= kReferenceTailTol) {
    throw TruncationError(std::string(what) + ": truncated tail population " + std::to_string(full_norm2 - kept) +
                          " exceeds 1e-8");
  }
  return DensityMatrix::pure(psi);
}

}  // namespace detail

inline DensityMatrix reference_state(const ReferenceKind& kind, HilbertDim dim) {
  const int n = dim;
  return std::visit(
      [n](const auto& k) -> DensityMatrix {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, FockKind>) {
          if (k.n < 0 || k.n >= n) throw TruncationError("reference_state: Fock index outside truncated space");
          Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
          psi(k.n) = 1.0;
          return DensityMatrix::pure(psi);
        } else if constexpr (std::is_same_v<K, CoherentKind>) {
          if (!std::isfinite(k.alpha.real()) || !std::isfinite(k.alpha.imag()))
            throw ConfigError("reference_state: non-finite coherent amplitude");
          const double a2 = std::norm(k.alpha);
          const double mod = std::abs(k.alpha);
          const double phase = std::arg(k.alpha);
          Eigen::VectorXcd psi(n);
          for (int j = 0; j < n; ++j) {
            const double logmag = -0.5 * a2 + (j > 0 ? j * std::log(mod) : 0.0) - 0.5 * std::lgamma(j + 1.0);
            psi(j) = (mod == 0.0 && j > 0) ? cplx{} : std::polar(std::exp(logmag), j * phase);
          }
          return detail::normalized_pure(std::move(psi), 1.0, "coherent state");
        } else if constexpr (std::is_same_v<K, SqueezedVacuumKind>) {
          if (!std::isfinite(k.r) || !std::isfinite(k.theta)) throw ConfigError("reference_state: non-finite squeezing");
          // ψ_{2m} = (−e^{iθ} tanh r)^m √((2m)!) / (2^m m! √cosh r)
          const double t = std::tanh(std::abs(k.r));
          const double theta = k.theta + (k.r < 0 ? std::numbers::pi : 0.0);
          Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(n);
          for (int m = 0; 2 * m < n; ++m) {
            const double logmag = (m > 0 ? m * std::log(t) : 0.0) + 0.5 * std::lgamma(2.0 * m + 1.0) -
                                  m * std::log(2.0) - std::lgamma(m + 1.0) - 0.5 * std::log(std::cosh(k.r));
            if (t == 0.0 && m > 0) continue;
            psi(2 * m) = std::polar(std::exp(logmag), m * (theta + std::numbers::pi));
          }
          return detail::normalized_pure(std::move(psi), 1.0, "squeezed vacuum");
        } else {
          if (!(k.nbar >= 0.0) || !std::isfinite(k.nbar)) throw ConfigError("reference_state: thermal n̄ must be ≥ 0");
          const double q = k.nbar / (k.nbar + 1.0);
          const double tail = std::pow(q, n);
          if (tail >= kReferenceTailTol) throw TruncationError("thermal state: truncated tail exceeds 1e-8");
          Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
          double total = 0.0;
          for (int j = 0; j < n; ++j) {
            const double p = (1.0 - q) * std::pow(q, j);
            m(j, j) = p;
            total += p;
          }
          m /= total;
          return DensityMatrix(std::move(m));
        }
      },
      kind);
}

inline DensityMatrix vacuum(HilbertDim dim) { return reference_state(FockKind{0}, dim); }

// ---------------------------------------------------------------------------
// Expectation values and simple functionals

/// tr(ρ·op) in O(n²).
inline cplx expectation(const Eigen::MatrixXcd& rho, const Operator& op) {
  if (rho.rows() != op.rows() || rho.cols() != op.cols()) throw DimensionMismatch("expectation: dimension mismatch");
  return rho.cwiseProduct(op.transpose()).sum();
}

inline cplx expectation(const DensityMatrix& rho, const Operator& op) { return expectation(rho.matrix(), op); }

/// Diagonal of ρ. Values within round-off of 0 or 1 are clamped.
inline std::vector<double> photon_distribution(const Eigen::MatrixXcd& rho) {
  std::vector<double> p(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index k = 0; k < rho.rows(); ++k) p[static_cast<std::size_t>(k)] = std::clamp(rho(k, k).real(), 0.0, 1.0);
  return p;
}

inline std::vector<double> photon_distribution(const DensityMatrix& rho) { return photon_distribution(rho.matrix()); }

inline double mean_photon_number(const DensityMatrix& rho) {
  double n = 0.0;
  for (int k = 0; k < rho.dim(); ++k) n += k * rho(k, k).real();
  return n;
}

/// tr(ρ²) for Hermitian ρ.
inline double purity(const DensityMatrix& rho) { return rho.matrix().cwiseAbs2().sum(); }

/// Conjugation by exp(iθ n̂): rotates the state in phase space by θ.
inline DensityMatrix rotate(const DensityMatrix& rho, double theta) {
  const int n = rho.dim();
  Eigen::MatrixXcd m = rho.matrix();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) *= std::polar(1.0, theta * (i - j));
  return DensityMatrix::from_hermitian_part(m);
}

// ---------------------------------------------------------------------------
// Wigner function

/// Rectangular quadrature grid, both axes uniform.
struct QuadratureGrid {
  double x_min = -5.0;
  double x_max = 5.0;
  double p_min = -5.0;
  double p_max = 5.0;
  int n_x = 201;
  int n_p = 201;

  static QuadratureGrid square(double half_width, int points) {
    QuadratureGrid g{-half_width, half_width, -half_width, half_width, points, points};
    g.validate();
    return g;
  }

  void validate() const {
    if (!(x_max > x_min) || !(p_max > p_min)) throw GridError("QuadratureGrid: axes must be strictly increasing");
    if (n_x < 16 || n_p < 16) throw GridError("QuadratureGrid: need at least 16 points per axis");
  }

  double dx() const { return (x_max - x_min) / (n_x - 1); }
  double dp() const { return (p_max - p_min) / (n_p - 1); }
  double x(int i) const { return x_min + i * dx(); }
  double p(int j) const { return p_min + j * dp(); }
};

/// W(x_i, p_j) stored as values(i, j).
struct WignerField {
  QuadratureGrid grid;
  Eigen::MatrixXd values;

  double max_abs() const { return values.cwiseAbs().maxCoeff(); }

  /// Largest |W| on the grid boundary relative to the largest |W| anywhere.
  double boundary_ratio() const {
    const auto nx = values.rows();
    const auto np = values.cols();
    double b = 0.0;
    b = std::max(b, values.row(0).cwiseAbs().maxCoeff());
    b = std::max(b, values.row(nx - 1).cwiseAbs().maxCoeff());
    b = std::max(b, values.col(0).cwiseAbs().maxCoeff());
    b = std::max(b, values.col(np - 1).cwiseAbs().maxCoeff());
    const double m = max_abs();
    return m > 0.0 ? b / m : 0.0;
  }
};

/// 2-D trapezoid rule over the grid.
inline double trapezoid(const QuadratureGrid& g, const Eigen::MatrixXd& v) {
  double s = 0.0;
  for (int i = 0; i < g.n_x; ++i) {
    const double wx = (i == 0 || i == g.n_x - 1) ? 0.5 : 1.0;
    for (int j = 0; j < g.n_p; ++j) {
      const double wp = (j == 0 || j == g.n_p - 1) ? 0.5 : 1.0;
      s += wx * wp * v(i, j);
    }
  }
  return s * g.dx() * g.dp();
}

inline constexpr double kWignerBoundaryTol = 1e-6;

namespace detail {

// Σ_{m,n} ρ_mn W_{|m⟩⟨n|}(x, p) at one point, using the normalized Laguerre
// functions u_n^k(z) = √(n!/(n+k)!) z^{k/2} e^{−z/2} L_n^k(z), z = 2(x²+p²),
// which stay O(1) for any n and obey a three-term recurrence in n.
inline double wigner_point(const Eigen::MatrixXcd& rho, double x, double p) {
  const int n = static_cast<int>(rho.rows());
  const double r2 = x * x + p * p;
  const double z = 2.0 * r2;
  const double r = std::sqrt(r2);
  const cplx rot = r > 0.0 ? cplx(x, -p) / r : cplx(1.0, 0.0);  // e^{−iφ}
  const double logz = z > 0.0 ? std::log(z) : 0.0;

  double total = 0.0;
  cplx phase = 1.0;
  for (int k = 0; k < n; ++k) {
    double u_prev = 0.0;
    double u;
    if (k == 0) {
      u = std::exp(-0.5 * z);
    } else {
      u = z > 0.0 ? std::exp(0.5 * k * logz - 0.5 * z - 0.5 * std::lgamma(k + 1.0)) : 0.0;
    }
    cplx acc = 0.0;
    for (int m = 0; m + k < n; ++m) {
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      acc += sign * rho(m + k, m) * u;
      const double next = ((2.0 * m + 1.0 + k - z) * u - std::sqrt(static_cast<double>(m) * (m + k)) * u_prev) /
                          std::sqrt((m + 1.0) * (m + 1.0 + k));
      u_prev = u;
      u = next;
    }
    if (k == 0) {
      total += acc.real();
    } else {
      total += 2.0 * (acc * phase).real();
    }
    phase *= rot;
  }
  return total / std::numbers::pi;
}

}  // namespace detail

/// Wigner function of an arbitrary Hermitian matrix on `grid`. Throws
/// TruncationError if the grid does not contain the state (boundary values
/// above 1e−6 of the peak) unless `check_boundary` is false.
inline WignerField wigner(const Eigen::MatrixXcd& rho, const QuadratureGrid& grid, bool check_boundary = true) {
  grid.validate();
  WignerField field{grid, Eigen::MatrixXd(grid.n_x, grid.n_p)};
  for (int i = 0; i < grid.n_x; ++i)
    for (int j = 0; j < grid.n_p; ++j) field.values(i, j) = detail::wigner_point(rho, grid.x(i), grid.p(j));
  if (check_boundary && field.boundary_ratio() > kWignerBoundaryTol) {
    throw TruncationError("wigner: grid too small, boundary |W| ratio " + std::to_string(field.boundary_ratio()));
  }
  return field;
}

inline WignerField wigner(const DensityMatrix& rho, const QuadratureGrid& grid, bool check_boundary = true) {
  return wigner(rho.matrix(), grid, check_boundary);
}

/// Square grid sized from the state: half-width 4 + 2√(n̄+1), widened to
/// 6 standard deviations of the broadest quadrature but never far past the
/// radius √(2N+1) of the highest occupied level N. Refined past `points`
/// when the narrowest quadrature or the ~2√(2N+1) bandwidth of W needs it.
inline QuadratureGrid default_grid(const DensityMatrix& rho, int points = 201) {
  const HilbertDim dim(rho.dim());
  const Operator c = annihilation(dim);
  const cplx mean = expectation(rho, c);
  const double nbar = std::max(0.0, expectation(rho, creation(dim) * c).real());
  const cplx m2 = expectation(rho, c * c);
  const double n_c = nbar - std::norm(mean);
  const cplx m2_c = m2 - mean * mean;
  const double vmax = 0.5 + n_c + std::abs(m2_c);
  const double shift = std::abs(mean) * std::sqrt(2.0);
  const std::vector<double> pops = photon_distribution(rho);
  int top = static_cast<int>(pops.size()) - 1;
  while (top > 0 && pops[static_cast<std::size_t>(top)] < 1e-10) --top;
  const double radius = std::sqrt(2.0 * top + 1.0);
  double half = std::max(4.0 + 2.0 * std::sqrt(nbar + 1.0), shift + 6.0 * std::sqrt(std::max(vmax, 0.5)));
  half = std::min(half, radius + 6.0);
  const double vmin = std::max(0.5 + n_c - std::abs(m2_c), 1e-6);
  const double h = std::min(std::sqrt(vmin) / 4.0, std::numbers::pi / (2.0 * radius));
  const int needed = static_cast<int>(std::ceil(2.0 * half / h)) + 1;
  int n = std::max(points, std::min(needed, 1201));
  if (n % 2 == 0) ++n;
  return QuadratureGrid::square(half, n);
}

}  // namespace kpo
