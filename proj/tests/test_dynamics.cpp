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


#include <gtest/gtest.h>

#include <cmath>

#include "kpo/dynamics.hpp"
#include "kpo/gaussian_po.hpp"

namespace {

using namespace kpo;

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

LindbladModel pure_loss(int n, double gamma = 1.0) {
  return LindbladModel(Operator::Zero(n, n), {CollapseChannel(annihilation(HilbertDim(n)), gamma)});
}

TEST(LindbladRhs, TrivialModelsGiveZero) {
  const HilbertDim d(5);
  const DensityMatrix rho = reference_state(FockKind{2}, d);
  EXPECT_EQ(max_abs(lindblad_rhs(LindbladModel(Operator::Zero(5, 5), {}), rho, 0.0)), 0.0);
  EXPECT_LT(max_abs(lindblad_rhs(pure_loss(5), vacuum(d), 0.0)), 1e-15);
}

TEST(LindbladRhs, SinglePhotonDecayRates) {
  const Eigen::MatrixXcd d = lindblad_rhs(pure_loss(4), reference_state(FockKind{1}, HilbertDim(4)), 0.0);
  EXPECT_NEAR(d(1, 1).real(), -1.0, 1e-15);
  EXPECT_NEAR(d(0, 0).real(), 1.0, 1e-15);
}

TEST(LindbladRhs, TracelessAndHermitian) {
  const SystemParams p{cplx(0.6, 0.2), 0.7, 1.0};
  const LindbladModel m = kpo_model(p, HilbertDim(12));
  const DensityMatrix rho = reference_state(CoherentKind{cplx(0.8, -0.3)}, HilbertDim(12));
  const Eigen::MatrixXcd d = lindblad_rhs(m, rho, 0.0);
  EXPECT_LT(std::abs(d.trace()), 1e-12);
  EXPECT_LT(max_abs(d - d.adjoint()), 1e-12);
}

TEST(LindbladRhs, DimensionMismatchThrows) {
  EXPECT_THROW(lindblad_rhs(pure_loss(4), vacuum(HilbertDim(5)), 0.0), DimensionMismatch);
}

TEST(Evolve, ExponentialDecayOfOnePhoton) {
  const auto traj = evolve(pure_loss(6), reference_state(FockKind{1}, HilbertDim(6)), {0.0, 1.0}, 1e-10);
  EXPECT_NEAR(traj.back()(1, 1).real(), std::exp(-1.0), 1e-6);
}

TEST(Evolve, KerrAndLossKeepDiagonalStatesDiagonal) {
  const LindbladModel m = kpo_model(SystemParams{0.0, 0.5, 1.0}, HilbertDim(10));
  Eigen::VectorXcd diag = Eigen::VectorXcd::Zero(10);
  diag.head(6).setConstant(1.0 / 6);
  const DensityMatrix rho0(Eigen::MatrixXcd(diag.asDiagonal()));
  const auto traj = evolve(m, rho0, {0.0, 0.5, 2.0});
  for (const auto& r : traj) {
    Eigen::MatrixXcd off = r.matrix();
    off.diagonal().setZero();
    EXPECT_LT(max_abs(off), 1e-14);
  }
}

TEST(Evolve, PreservesTraceHermiticityPositivity) {
  const LindbladModel m = kpo_model(SystemParams{0.65, 0.5, 1.0}, HilbertDim(16));
  std::vector<double> ts;
  for (int i = 0; i <= 20; ++i) ts.push_back(0.25 * i);
  for (const auto& r : evolve(m, vacuum(HilbertDim(16)), ts)) {
    EXPECT_NEAR(r.matrix().trace().real(), 1.0, 1e-9);
    EXPECT_LT(max_abs(r.matrix() - r.matrix().adjoint()), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r.matrix());
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(Evolve, RejectsBadArguments) {
  const LindbladModel m = pure_loss(3);
  const DensityMatrix v = vacuum(HilbertDim(3));
  EXPECT_THROW(evolve(m, v, {0.0, 1.0}, 1e-3), ConfigError);
  EXPECT_THROW(evolve(m, v, {1.0, 0.5}), ConfigError);
  EXPECT_THROW(evolve(m, vacuum(HilbertDim(4)), {0.0, 1.0}), DimensionMismatch);
}

TEST(Evolve, GrowingTailRaisesTruncationError) {
  // strong linear drive pushes population to the cutoff
  const HilbertDim d(6);
  const Operator c = annihilation(d);
  LindbladModel m(Operator(3.0 * (c + c.adjoint())), {CollapseChannel(c, 0.1)});
  EXPECT_THROW(evolve(m, vacuum(d), {0.0, 5.0}), TruncationError);
}

TEST(Evolve, LongTimeLimitMatchesSteadyState) {
  const LindbladModel m = kpo_model(SystemParams{0.2, 0.0, 1.0}, HilbertDim(30));
  const DensityMatrix ss = steady_state(m);
  const auto traj = evolve(m, vacuum(HilbertDim(30)), {0.0, 40.0}, 1e-10);
  const Operator n = creation(HilbertDim(30)) * annihilation(HilbertDim(30));
  EXPECT_NEAR(expectation(traj.back(), n).real(), expectation(ss, n).real(), 1e-6);
}

TruncationPolicy tight_tail() {
  TruncationPolicy p;
  p.tail_tol = 1e-12;
  return p;
}

TEST(SteadyState, UndrivenIsVacuum) {
  const DensityMatrix ss = steady_state(kpo_model(SystemParams{0.0, 0.8, 1.0}, HilbertDim(10)));
  EXPECT_NEAR(ss(0, 0).real(), 1.0, 1e-12);
}

TEST(SteadyState, LinearOscillatorPhotonNumberAndMean) {
  const SystemParams p{0.4, 0.0, 1.0};
  const CovarianceMatrix v = po_cavity_covariance(p);
  const DensityMatrix ss = cavity_steady_state(p, tight_tail()).rho;
  const HilbertDim d(ss.dim());
  EXPECT_NEAR(expectation(ss, creation(d) * annihilation(d)).real(), v.mean_photons(), 1e-6);
  EXPECT_NEAR(v.mean_photons(), 0.8889, 1e-4);
  EXPECT_LT(std::abs(expectation(ss, annihilation(d))), 1e-12);
}

TEST(SteadyState, SecondMomentsMatchClosedForms) {
  for (double beta : {0.1, 0.25, 0.4}) {
    const SystemParams p{beta, 0.0, 1.0};
    const DensityMatrix ss = cavity_steady_state(p, tight_tail()).rho;
    const CovarianceMatrix num = covariance_of(ss);
    const CovarianceMatrix ref = po_cavity_covariance(p);
    EXPECT_NEAR(num.v11, ref.v11, 1e-8);
    EXPECT_NEAR(num.v22, ref.v22, 1e-8);
    EXPECT_NEAR(num.v12, ref.v12, 1e-8);
  }
}

TEST(SteadyState, IsAFixedPointOfEvolution) {
  const LindbladModel m = kpo_model(SystemParams{0.65, 0.5, 1.0}, HilbertDim(16));
  const DensityMatrix ss = steady_state(m);
  EXPECT_LT(max_abs(lindblad_rhs(m, ss, 0.0)), 1e-10);
  const auto traj = evolve(m, ss, {0.0, 10.0}, 1e-10);
  EXPECT_LT(max_abs(traj.back().matrix() - ss.matrix()), 1e-8);
}

TEST(SteadyState, DegenerateNullSpaceIsDetected) {
  // no dissipation: every diagonal state is stationary
  EXPECT_THROW(steady_state(LindbladModel(Operator(number_operator(HilbertDim(4))), {})), DegenerateSteadyState);
}

TEST(SteadyState, TruncationPolicyMeetsTailTolerance) {
  const CavitySteadyState ss = cavity_steady_state(SystemParams{1.0, 0.5, 1.0});
  const int n = ss.dim;
  EXPECT_LT(ss.rho(n - 1, n - 1).real(), 1e-8);
  EXPECT_LT(ss.rho(n - 2, n - 2).real(), 1e-8);
}

TEST(TwoTimeCorrelator, VacuumHasNoCorrelations) {
  const HilbertDim d(6);
  const LindbladModel m = kpo_model(SystemParams{0.0, 0.5, 1.0}, d);
  const auto g = two_time_correlator(m, steady_state(m), creation(d), annihilation(d), {0.0, 0.5, 2.0});
  for (const auto& v : g) EXPECT_LT(std::abs(v), 1e-12);
}

TEST(TwoTimeCorrelator, EqualTimeValue) {
  const HilbertDim d(30);
  const LindbladModel m = kpo_model(SystemParams{0.3, 0.0, 1.0}, d);
  const DensityMatrix ss = steady_state(m);
  const auto g = two_time_correlator(m, ss, creation(d), annihilation(d), {0.0});
  EXPECT_NEAR(std::abs(g[0] - expectation(ss, creation(d) * annihilation(d))), 0.0, 1e-14);
}

TEST(TwoTimeCorrelator, SqueezedQuadratureDecaysExponentially) {
  const double beta = 0.2;
  const HilbertDim d(30);
  const LindbladModel m = kpo_model(SystemParams{beta, 0.0, 1.0}, d);
  const DensityMatrix ss = steady_state(m);
  const Operator c = annihilation(d);
  const Operator x = (c + c.adjoint()) / std::sqrt(2.0);
  const Operator p = (c - c.adjoint()) / cplx(0.0, std::sqrt(2.0));
  const Operator u = (x + p) / std::sqrt(2.0);
  const CovarianceMatrix v = po_cavity_covariance(SystemParams{beta, 0.0, 1.0});
  const double vu = v.min_eigenvalue();
  const std::vector<double> taus{0.0, 0.3, 1.0, 2.5};
  const auto g = two_time_correlator(m, ss, u, u, taus, 1e-10);
  for (std::size_t i = 0; i < taus.size(); ++i)
    EXPECT_NEAR(g[i].real(), vu * std::exp(-(beta + 0.5) * taus[i]), 1e-6) << "tau=" << taus[i];
}

TEST(TwoTimeCorrelator, ReversedOrderingIsTheConjugate) {
  const HilbertDim d(14);
  const LindbladModel m = kpo_model(SystemParams{0.65, 0.5, 1.0}, d);
  const DensityMatrix ss = steady_state(m);
  const std::vector<double> taus{0.0, 0.4, 1.3};
  const auto fwd = two_time_correlator(m, ss, creation(d), annihilation(d), taus, 1e-10);
  const auto rev = two_time_correlator_reversed(m, ss, creation(d), annihilation(d), taus, 1e-10);
  for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_LT(std::abs(fwd[i] - std::conj(rev[i])), 1e-8);
}

}  // namespace
