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
#include <numbers>
#include <random>

#include "kpo/gaussian_po.hpp"
#include "kpo/nonclassicality.hpp"

namespace {

using namespace kpo;

std::vector<double> poisson_vector(double lambda, int n) {
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) p[static_cast<std::size_t>(k)] = std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
  return p;
}

std::vector<double> thermal_vector(double nbar, int n) {
  const double q = nbar / (1.0 + nbar);
  std::vector<double> p(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) p[static_cast<std::size_t>(k)] = (1.0 - q) * std::pow(q, k);
  return p;
}

TEST(SqueezingS, ReferenceStates) {
  EXPECT_NEAR(squeezing_s(vacuum(HilbertDim(4))), 0.5, 1e-15);
  EXPECT_NEAR(squeezing_s(reference_state(SqueezedVacuumKind{0.5}, HilbertDim(60))), 0.5 * std::exp(-1.0), 1e-9);
  EXPECT_NEAR(squeezing_s(reference_state(FockKind{1}, HilbertDim(4))), 1.5, 1e-15);
}

TEST(SqueezingS, NonzeroMeanIsRejected) {
  EXPECT_THROW(squeezing_s(reference_state(CoherentKind{0.3}, HilbertDim(20))), NonzeroMeanError);
}

TEST(SqueezingS, InvariantUnderRotation) {
  const DensityMatrix sv = reference_state(SqueezedVacuumKind{0.4, 0.3}, HilbertDim(40));
  for (double th : {0.2, 1.1, 2.9}) EXPECT_NEAR(squeezing_s(rotate(sv, th)), squeezing_s(sv), 1e-10);
}

TEST(SqueezingFromCovariance, EigenvalueAndRotationInvariance) {
  EXPECT_DOUBLE_EQ(squeezing_from_covariance(CovarianceMatrix{}), 0.5);
  const double a = 0.2, b = 1.25;
  for (double th : {0.0, 0.4, 1.3}) {
    const double c = std::cos(th), s = std::sin(th);
    const CovarianceMatrix v{a * c * c + b * s * s, a * s * s + b * c * c, (a - b) * c * s};
    EXPECT_NEAR(squeezing_from_covariance(v), a, 1e-14);
  }
}

TEST(Klyshko, FockPoissonThermal) {
  std::vector<double> fock2{0.0, 0.0, 1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(klyshko(fock2, 2), -2.0);
  for (double lambda : {0.1, 1.0, 1.9, 4.5}) {
    const auto p = poisson_vector(lambda, 30);
    for (int n = 1; n < 15; ++n) EXPECT_NEAR(klyshko(p, n), 0.0, 1e-12) << lambda << ' ' << n;
  }
  for (double nbar : {0.2, 1.0, 3.0}) {
    const auto p = thermal_vector(nbar, 30);
    const double q = nbar / (1.0 + nbar);
    for (int n = 1; n < 10; ++n) {
      EXPECT_GT(klyshko(p, n), 0.0);
      EXPECT_NEAR(klyshko(p, n), (1 - q) * (1 - q) * std::pow(q, 2 * n), 1e-14);
    }
  }
}

TEST(Klyshko, IndexBoundsAndFloor) {
  const std::vector<double> p{0.5, 0.3, 0.2};
  EXPECT_THROW(klyshko(p, 2), IndexError);
  EXPECT_THROW(klyshko(p, 0), IndexError);
  const std::vector<double> noisy{0.5, 1e-13, 0.5};
  EXPECT_DOUBLE_EQ(klyshko(noisy, 1), 2 * 0.25);
}

TEST(Wln, GaussianStatesAreNonNegative) {
  EXPECT_NEAR(wln(vacuum(HilbertDim(4))), 0.0, 1e-4);
  EXPECT_NEAR(wln(reference_state(SqueezedVacuumKind{0.6}, HilbertDim(60))), 0.0, 1e-4);
  EXPECT_NEAR(wln(covariance_to_fock({1.0, 1.0, 0.0}, HilbertDim(40))), 0.0, 1e-4);
  EXPECT_NEAR(wln(covariance_to_fock(po_output_covariance_boxcar(SystemParams{0.4, 0.0, 1.0}, 4.0), HilbertDim(160))), 0.0,
              1e-4);
}

TEST(Wln, SinglePhotonAgainstRadialQuadrature) {
  // W_1 = (2r² − 1) e^{−r²}/π with r² = x² + p²; integrate |W| on a fine radial grid
  const int n = 400000;
  const double rmax = 8.0, h = rmax / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) * h;
    acc += std::abs((2 * r * r - 1) * std::exp(-r * r)) / std::numbers::pi * 2 * std::numbers::pi * r * h;
  }
  const double ref = std::log(acc);
  EXPECT_NEAR(ref, 0.355, 1e-3);
  EXPECT_NEAR(wln(reference_state(FockKind{1}, HilbertDim(4))), ref, 1e-3);
}

TEST(Wln, GridConvergedUnderRefinement) {
  const DensityMatrix f = reference_state(FockKind{2}, HilbertDim(4));
  const QuadratureGrid g = default_grid(f);
  const QuadratureGrid g2 = QuadratureGrid::square(2 * g.x_max, 2 * g.n_x - 1);
  EXPECT_LT(std::abs(wln(wigner(f, g)) - wln(wigner(f, g2))), 1e-4);
}

TEST(Wln, RejectsGridsThatCutTheState) {
  const DensityMatrix f = reference_state(FockKind{3}, HilbertDim(5));
  EXPECT_THROW(wln(wigner(f, QuadratureGrid::square(2.0, 41), false)), GridError);
}

TEST(PoissonPredictors, ValuesAndLimits) {
  const PoissonPredictors a = poisson_predictors(SystemParams{0.65, 0.5, 1.0});
  EXPECT_NEAR(a.n_cav, 0.5 * std::sqrt(1.3 * 1.3 - 1.0), 1e-14);
  EXPECT_NEAR(a.n_cav, 0.4153, 1e-4);
  EXPECT_NEAR(a.t_star, 4.82, 5e-3);
  EXPECT_NEAR(a.rho2_star, 2.0 * std::exp(-2.0), 1e-15);
  EXPECT_NEAR(a.rho2_star, 0.2707, 1e-4);
  const PoissonPredictors big = poisson_predictors(SystemParams{1e4, 1.0, 1.0});
  EXPECT_NEAR(big.n_cav / (1e4 / 2.0), 1.0, 1e-8);
  EXPECT_THROW(poisson_predictors(SystemParams{0.2, 0.5, 1.0}), BelowThreshold);
  EXPECT_THROW(poisson_predictors(SystemParams{0.2, 0.0, 1.0}), BelowThreshold);
}

TEST(PoissonFit, ExactPoissonAndFock) {
  const PoissonFit f = poisson_fit(poisson_vector(2.0, 40));
  EXPECT_NEAR(f.lambda, 2.0, 1e-6);
  // λ is located by a bracketing minimizer, good to ~√ε
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-8);
  const PoissonFit g = poisson_fit({0.0, 0.0, 1.0, 0.0, 0.0, 0.0});
  EXPECT_GT(g.rms_residual, 0.1);
}

TEST(PoissonFit, LeastSquaresOptimality) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(12);
  double s = 0.0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  const PoissonFit f = poisson_fit(p);
  auto sse = [&](double l) {
    double acc = 0.0;
    for (int k = 0; k < 12; ++k) acc += std::pow(p[static_cast<std::size_t>(k)] - poisson_probability(l, k), 2);
    return acc;
  };
  for (int i = 0; i <= 2000; ++i) EXPECT_GE(sse(i * 0.01) + 1e-14, sse(f.lambda));
}

TEST(ComputeMetrics, FieldsAreConsistent) {
  const DensityMatrix sv = reference_state(SqueezedVacuumKind{0.4}, HilbertDim(40));
  const MetricsRecord m = compute_metrics(sv);
  double total = 0.0;
  for (double v : m.populations) total += v;
  EXPECT_NEAR(total, 1.0, 1e-6);
  EXPECT_NEAR(m.s, 0.5 * std::exp(-0.8), 1e-9);
  EXPECT_NEAR(m.purity, 1.0, 1e-9);
  EXPECT_NEAR(m.n_mean, std::sinh(0.4) * std::sinh(0.4), 1e-9);
  EXPECT_NEAR(m.wln, 0.0, 1e-4);
  EXPECT_DOUBLE_EQ(m.b(2), klyshko(m.populations, 2));
  EXPECT_TRUE(std::isnan(m.b(0)));
  EXPECT_TRUE(std::isnan(compute_metrics(reference_state(CoherentKind{0.5}, HilbertDim(20))).s));
}

}  // namespace
