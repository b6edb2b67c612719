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

#include "kpo/gaussian_po.hpp"
#include "kpo/nonclassicality.hpp"
#include "kpo/pulse_io.hpp"

namespace {

using namespace kpo;

void expect_covariance_near(const CovarianceMatrix& a, const CovarianceMatrix& b, double tol) {
  EXPECT_NEAR(a.v11, b.v11, tol);
  EXPECT_NEAR(a.v22, b.v22, tol);
  EXPECT_NEAR(a.v12, b.v12, tol);
}

TEST(CascadedModel, UncoupledOutsideThePacket) {
  const SystemParams p{0.3, 0.2, 1.0};
  const FilterFunction f = boxcar_filter(1.0, 1.0, TimeGrid(0.0, 3.0, 300));
  const int nc = 8, nm = 4;
  const LindbladModel joint = cascaded_model(p, f, nc, nm);
  const LindbladModel cav = kpo_model(p, HilbertDim(nc));
  const DensityMatrix rc = reference_state(CoherentKind{0.4}, HilbertDim(nc));
  const DensityMatrix rm = reference_state(FockKind{1}, HilbertDim(nm));
  const DensityMatrix rho(Eigen::kroneckerProduct(rc.matrix(), rm.matrix()).eval());
  const Eigen::MatrixXcd expect = Eigen::kroneckerProduct(lindblad_rhs(cav, rc, 0.0), rm.matrix()).eval();
  EXPECT_LT((lindblad_rhs(joint, rho, 0.5) - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GT((lindblad_rhs(joint, rho, 1.5) - expect).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(OutputModeState, NoLeakageMeansVacuum) {
  const FilterFunction f = boxcar_filter(2.0, 0.01);
  const DensityMatrix out = output_mode_state(SystemParams{0.4, 0.3, 0.0}, f);
  EXPECT_NEAR(out(0, 0).real(), 1.0, 1e-12);
}

TEST(OutputModeState, NoDriveMeansVacuum) {
  for (const FilterFunction& f : {boxcar_filter(3.0, 0.01), gaussian_filter(0.8, 0.05)}) {
    const DensityMatrix out = output_mode_state(SystemParams{0.0, 0.5, 1.0}, f);
    EXPECT_NEAR(out(0, 0).real(), 1.0, 1e-12);
  }
}

TEST(OutputModeState, LinearOscillatorMatchesClosedFormBoxcar) {
  for (double beta : {0.1, 0.2}) {
    for (double T : {0.5, 1.0, 4.0}) {
      const SystemParams p{beta, 0.0, 1.0};
      const CovarianceMatrix num = covariance_of(output_mode_state(p, boxcar_filter(T, 0.01)));
      expect_covariance_near(num, po_output_covariance_boxcar(p, T), 1e-3);
    }
  }
}

TEST(OutputModeState, LinearOscillatorMatchesClosedFormGaussian) {
  const SystemParams p{0.2, 0.0, 1.0};
  const FilterFunction f = gaussian_filter(0.6, 0.02);
  expect_covariance_near(covariance_of(output_mode_state(p, f)), po_output_covariance(p, f), 1e-3);
}

TEST(OutputModeState, FilterSignDoesNotChangePhotonStatistics) {
  const SystemParams p{0.65, 0.5, 1.0};
  const FilterFunction f = gaussian_filter(0.7, 0.05);
  const auto a = photon_distribution(output_mode_state(p, f));
  const auto b = photon_distribution(output_mode_state(p, f.negated()));
  ASSERT_EQ(a.size(), b.size());
  // rounding-level differences change the adaptive step sequence, so the
  // two runs agree to the integration tolerance rather than bitwise
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(a[n], b[n], 1e-5);
}

TEST(Extract, SinglePhotonTransientUnderPureLoss) {
  const double T = 2.0, gamma = 1.0;
  const SystemParams p{0.0, 0.0, gamma};
  const FilterFunction f = boxcar_filter(T, 0.01);
  const CascadedState s = extract(p, f, reference_state(FockKind{1}, HilbertDim(3)), 0);
  // amplitude captured by the packet: ∫ f √γ e^{−γt/2} dt
  const double amp = std::sqrt(gamma / T) * 2.0 / gamma * (1.0 - std::exp(-0.5 * gamma * T));
  const double n_mode = mean_photon_number(s.mode);
  const double n_cav = mean_photon_number(s.cavity);
  EXPECT_NEAR(n_mode, amp * amp, 1e-6);
  EXPECT_NEAR(n_cav, std::exp(-gamma * T), 1e-6);
  EXPECT_GE(1.0 - n_mode - n_cav, -1e-9);
}

TEST(Extract, CavityReductionStaysStationary) {
  const SystemParams p{0.65, 0.5, 1.0};
  const CascadedState s = extract(p, boxcar_filter(2.0, 0.01));
  const DensityMatrix ss = steady_state(kpo_model(p, HilbertDim(s.dim_cavity)));
  EXPECT_LT((s.cavity.matrix() - ss.matrix()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Extract, ModeStateSatisfiesInvariantsAndTailBound) {
  const CascadedState s = extract(SystemParams{0.65, 0.5, 1.0}, boxcar_filter(5.0, 0.01));
  EXPECT_LE(s.mode_tail, 1e-6);
  const int n = s.mode.dim();
  EXPECT_LT(s.mode(n - 1, n - 1).real() + s.mode(n - 2, n - 2).real(), 1e-6);
}

TEST(Extract, UndersizedModeSpaceThrows) {
  const SystemParams p{0.65, 0.5, 1.0};
  EXPECT_THROW(extract(p, boxcar_filter(5.0, 0.01), ExtractionDims{0, 3}), TruncationError);
}

TEST(Extract, RegularizationCutoffIsHarmless) {
  const SystemParams p{0.65, 0.5, 1.0};
  const FilterFunction f = boxcar_filter(2.5, 0.01);
  ExtractionOptions half;
  half.epsilon = 0.5 * kCouplingEpsilon;
  const MetricsRecord a = compute_metrics(extract(p, f).mode);
  const MetricsRecord b = compute_metrics(extract(p, f, ExtractionDims{}, half).mode);
  EXPECT_LT(std::abs(a.wln - b.wln), 1e-4);
  EXPECT_LT(std::abs(a.purity - b.purity), 1e-4);
  EXPECT_LT(std::abs(a.s - b.s), 1e-4);
  EXPECT_LT(std::abs(a.b(2) - b.b(2)), 1e-4);
}

TEST(Extract, HeadlineNegativityAtFiveUnitBoxcar) {
  const MetricsRecord m = compute_metrics(extract(SystemParams{0.65, 0.5, 1.0}, boxcar_filter(5.0, 0.01)).mode);
  EXPECT_NEAR(m.wln, 0.05, 0.01);
}

TEST(ExtractionCavityState, ExplicitTruncationIsHonored) {
  const DensityMatrix r = extraction_cavity_state(SystemParams{0.65, 0.5, 1.0}, 14, TruncationPolicy{});
  EXPECT_EQ(r.dim(), 14);
}

}  // namespace
