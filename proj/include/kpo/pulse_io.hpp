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

// Density matrix of a temporal mode of the output field. A virtual capture
// mode b, fed by the cavity output through the time-dependent coupling g(t),
// absorbs exactly the wave packet f(t); its state at the end of the packet
// is the state of the filtered output mode.

#pragma once

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/errors.hpp"
#include "kpo/filter.hpp"
#include "kpo/fock_core.hpp"

namespace kpo {

inline constexpr double kCouplingEpsilon = 1e-8;

/// g(t) = −f(t) / √max(ε, ∫_{t0}^{t} f²). The capture mode reflects nothing
/// back into the line, so the whole packet f ends up in b.
inline double capture_coupling(const FilterFunction& f, double t, double epsilon = kCouplingEpsilon) {
  const double v = f.value(t);
  if (v == 0.0) return 0.0;
  return -v / std::sqrt(std::max(epsilon, f.running_norm(t)));
}

/// g(t_i) on the filter's sample grid.
inline std::vector<double> extraction_coupling(const FilterFunction& f, double epsilon = kCouplingEpsilon) {
  std::vector<double> g(static_cast<std::size_t>(f.grid().points()));
  for (int i = 0; i < f.grid().points(); ++i) g[static_cast<std::size_t>(i)] = capture_coupling(f, f.grid().time(i), epsilon);
  return g;
}

/// Truncations of the joint cavity ⊗ mode space; 0 selects automatically.
struct ExtractionDims {
  int cavity = 0;
  int mode = 0;
};

struct ExtractionOptions {
  double rel_tol = 1e-7;
  double epsilon = kCouplingEpsilon;
  /// Automatic mode truncation starts here and grows while the packet fills.
  int initial_mode_dim = 6;
  int max_mode_dim = 400;
  TruncationPolicy cavity_policy{};
  /// Population allowed in the two highest mode levels at any time.
  double mode_tail_tol = 1e-6;
  /// Automatic truncation grows once the top levels exceed this.
  double grow_trigger = 1e-8;
};

/// Index of |n_c⟩ ⊗ |n_m⟩ in the joint basis.
inline int joint_index(int nc, int nm, int dim_mode) { return nc * dim_mode + nm; }

/// Cascaded model on cavity ⊗ mode: H = H_kpo ⊗ 1 − (i/2)√γ g(t)(b†c − c†b),
/// one collapse operator √γ c + g(t) b.
inline LindbladModel cascaded_model(const SystemParams& params, const FilterFunction& filter, int dim_cavity, int dim_mode,
                                    double epsilon = kCouplingEpsilon) {
  if (!(params.gamma >= 0.0) || !std::isfinite(params.gamma)) throw ConfigError("cascaded_model: gamma must be ≥ 0");
  const HilbertDim nc(dim_cavity);
  const HilbertDim nm(dim_mode);
  const SparseOp ic = to_sparse(identity(nc));
  const SparseOp im = to_sparse(identity(nm));
  const SparseOp c = Eigen::kroneckerProduct(to_sparse(annihilation(nc)), im);
  const SparseOp b = Eigen::kroneckerProduct(ic, to_sparse(annihilation(nm)));
  const SparseOp h_sys = Eigen::kroneckerProduct(to_sparse(kpo_hamiltonian(params.beta, params.kerr, nc)), im);
  const SparseOp exchange = SparseOp(b.adjoint()) * c - SparseOp(c.adjoint()) * b;

  auto f = std::make_shared<const FilterFunction>(filter);
  auto g = [f, epsilon](double t) { return capture_coupling(*f, t, epsilon); };
  const double sg = std::sqrt(params.gamma);

  LindbladModel model(dim_cavity * dim_mode, {dim_cavity, dim_mode});
  model.add_hamiltonian(ModelTerm(h_sys));
  model.add_hamiltonian(ModelTerm(exchange, [g, sg](double t) { return cplx(0.0, -0.5 * sg * g(t)); }));
  model.add_channel(
      CollapseChannel(1.0, {ModelTerm(SparseOp(sg * c)), ModelTerm(b, [g](double t) { return cplx(g(t), 0.0); })}));
  model.set_breakpoints(filter.breakpoints());
  std::vector<int> parity(static_cast<std::size_t>(dim_cavity * dim_mode));
  for (int i = 0; i < dim_cavity; ++i)
    for (int j = 0; j < dim_mode; ++j) parity[static_cast<std::size_t>(joint_index(i, j, dim_mode))] = (i + j) % 2;
  model.set_sectors(std::move(parity));
  return model;
}

/// Joint state at the end of the packet, with its two reductions.
struct CascadedState {
  int dim_cavity;
  int dim_mode;
  DensityMatrix mode;
  DensityMatrix cavity;
  long steps;
  /// Largest population seen in the two highest mode levels.
  double mode_tail;
};

namespace detail {

inline Eigen::MatrixXcd reduce_to_mode(const HermitianPropagator& p, int nc, int nm) {
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(nm, nm);
  for (int c = 0; c < nc; ++c)
    for (int i = 0; i < nm; ++i)
      for (int j = 0; j < nm; ++j) r(i, j) += p.element(joint_index(c, i, nm), joint_index(c, j, nm));
  return r;
}

inline Eigen::MatrixXcd reduce_to_cavity(const HermitianPropagator& p, int nc, int nm) {
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(nc, nc);
  for (int m = 0; m < nm; ++m)
    for (int i = 0; i < nc; ++i)
      for (int j = 0; j < nc; ++j) r(i, j) += p.element(joint_index(i, m, nm), joint_index(j, m, nm));
  return r;
}

inline double mode_tail(const HermitianPropagator& p, int nc, int nm) {
  double top = 0.0, next = 0.0;
  for (int c = 0; c < nc; ++c) {
    top += p.element(joint_index(c, nm - 1, nm), joint_index(c, nm - 1, nm)).real();
    next += p.element(joint_index(c, nm - 2, nm), joint_index(c, nm - 2, nm)).real();
  }
  return std::max(std::abs(top), std::abs(next));
}

/// Pads the mode factor of a joint state from nm to nm_new levels.
inline Eigen::MatrixXcd widen_mode(const Eigen::MatrixXcd& rho, int nc, int nm, int nm_new) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(nc * nm_new, nc * nm_new);
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) out.block(a * nm_new, b * nm_new, nm, nm) = rho.block(a * nm, b * nm, nm, nm);
  return out;
}

inline CascadedState run_cascade(const SystemParams& params, const FilterFunction& filter, const DensityMatrix& cavity0,
                                 int nm, bool grow, const ExtractionOptions& opts) {
  const int nc = cavity0.dim();
  if (nm < 2) throw ConfigError("output_mode_state: mode truncation must be ≥ 2");
  Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(nm, nm);
  vac(0, 0) = 1.0;
  auto model = std::make_unique<LindbladModel>(cascaded_model(params, filter, nc, nm, opts.epsilon));
  auto prop = std::make_unique<HermitianPropagator>(*model, Eigen::kroneckerProduct(cavity0.matrix(), vac).eval(),
                                                    PropagatorOptions{opts.rel_tol, 0.0});
  const auto [a, b] = filter.support();
  prop->set_time(a);
  long steps = 0;
  double worst = 0.0;
  // Photons in b only accumulate; the mode tail is watched after every step.
  for (double t = a; t < b;) {
    t = prop->advance_until(b, [&] {
      const double tail = mode_tail(*prop, nc, nm);
      worst = std::max(worst, tail);
      return grow && tail > opts.grow_trigger;
    });
    if (worst > opts.mode_tail_tol) {
      throw TruncationError("output_mode_state: mode truncation " + std::to_string(nm) + " too small (tail " +
                            std::to_string(worst) + ")");
    }
    if (t < b) {
      const int nm_new = nm + std::max(4, nm / 4);
      if (nm_new > opts.max_mode_dim) throw TruncationError("output_mode_state: mode truncation exceeds max_mode_dim");
      Eigen::MatrixXcd wide = widen_mode(prop->matrix(), nc, nm, nm_new);
      steps += prop->steps();
      prop.reset();
      model = std::make_unique<LindbladModel>(cascaded_model(params, filter, nc, nm_new, opts.epsilon));
      prop = std::make_unique<HermitianPropagator>(*model, wide, PropagatorOptions{opts.rel_tol, 0.0});
      prop->set_time(t);
      nm = nm_new;
    }
  }
  steps += prop->steps();
  return {nc,    nm,   DensityMatrix::from_hermitian_part(reduce_to_mode(*prop, nc, nm)),
          DensityMatrix::from_hermitian_part(reduce_to_cavity(*prop, nc, nm)),
          steps, worst};
}

}  // namespace detail

/// Initial cavity state: the steady state of the oscillator (vacuum when
/// nothing leaks out, γ = 0).
inline DensityMatrix extraction_cavity_state(const SystemParams& params, int dim_cavity, const TruncationPolicy& policy) {
  if (params.gamma == 0.0) return vacuum(HilbertDim(dim_cavity > 0 ? dim_cavity : 2));
  DensityMatrix rho = dim_cavity > 0 ? steady_state(kpo_model(params, HilbertDim(dim_cavity)))
                                     : cavity_steady_state(params, policy).rho;
  const Eigen::MatrixXcd drift = lindblad_rhs(kpo_model(params, HilbertDim(rho.dim())), rho, 0.0);
  if (drift.cwiseAbs().maxCoeff() > 1e-8) throw SteadyStateNotReached("output_mode_state: cavity is not stationary at onset");
  return rho;
}

/// Extraction starting from an arbitrary cavity state (transients included).
/// `dim_mode` = 0 selects the growing mode truncation.
inline CascadedState extract(const SystemParams& params, const FilterFunction& filter, const DensityMatrix& cavity0,
                             int dim_mode, const ExtractionOptions& opts = {}) {
  if (dim_mode > 0) return detail::run_cascade(params, filter, cavity0, dim_mode, false, opts);
  return detail::run_cascade(params, filter, cavity0, opts.initial_mode_dim, true, opts);
}

/// Full cascaded extraction, returning both reduced states. Without an
/// explicit mode truncation the mode space widens whenever its two highest
/// levels pass `grow_trigger`.
inline CascadedState extract(const SystemParams& params, const FilterFunction& filter, ExtractionDims dims = {},
                             const ExtractionOptions& opts = {}) {
  if (!(params.gamma >= 0.0)) throw ConfigError("output_mode_state: gamma must be ≥ 0");
  return extract(params, filter, extraction_cavity_state(params, dims.cavity, opts.cavity_policy), dims.mode, opts);
}

/// State of the wave-packet mode f of the steady-state output field.
inline DensityMatrix output_mode_state(const SystemParams& params, const FilterFunction& filter, ExtractionDims dims = {},
                                       double rel_tol = 1e-7) {
  ExtractionOptions opts;
  opts.rel_tol = rel_tol;
  return extract(params, filter, dims, opts).mode;
}

}  // namespace kpo
