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

// Filter-shape optimization for maximal Wigner negativity (Nelder–Mead on
// the node values of a piecewise-linear profile) and Gaussian profile fits.

#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/filter.hpp"
#include "kpo/harness/sweep.hpp"
#include "kpo/nonclassicality.hpp"
#include "kpo/pulse_io.hpp"

namespace kpo::harness {

struct OptimizerConfig {
  int n_points = 18;  // nodes across the support, both ends pinned to zero
  unsigned seed = 1;
  int max_iters = 2000;
  int restarts = 5;
  double t_start = 9.0;  // support of the optimized profile
  double t_end = 25.0;
  double initial_step = 0.2;
  double size_tol = 1e-4;
  int workers = 1;
  PointOptions point{};

  void validate() const {
    if (n_points < 8) throw ConfigError("optimize_filter: n_points must be ≥ 8");
    if (restarts < 1) throw ConfigError("optimize_filter: restarts must be ≥ 1");
    if (max_iters < 1) throw ConfigError("optimize_filter: max_iters must be ≥ 1");
    if (!(t_end > t_start) || t_start < 0.0) throw ConfigError("optimize_filter: bad support window");
  }
};

// sample cells per node interval, enough for the ten-step grid minimum
inline int node_refinement(int n_nodes) { return std::max(1, static_cast<int>(std::ceil(10.0 / (n_nodes - 1)))); }

/// Piecewise-linear profile through `nodes` (uniform over [t_start, t_end],
/// end nodes forced to zero), normalized. The sample grid refines each node
/// interval so the nodes are grid points and the interpolant is unchanged.
inline FilterFunction node_filter(const std::vector<double>& nodes, double t_start, double t_end) {
  const int n = static_cast<int>(nodes.size());
  if (n < 3) throw ConfigError("node_filter: need at least 3 nodes");
  const int refine = node_refinement(n);
  const int steps = (n - 1) * refine;
  TimeGrid grid(t_start, t_end, steps);
  std::vector<double> s(static_cast<std::size_t>(steps + 1));
  for (int i = 0; i <= steps; ++i) {
    const int k = i / refine;
    const double u = static_cast<double>(i % refine) / refine;
    const double a = (k == 0 || k == n - 1) ? 0.0 : nodes[static_cast<std::size_t>(k)];
    const double b = (k + 1 >= n - 1) ? 0.0 : nodes[static_cast<std::size_t>(k + 1)];
    s[static_cast<std::size_t>(i)] = k >= n - 1 ? 0.0 : a + u * (b - a);
  }
  return custom_filter(grid, std::move(s), t_start);
}

struct OptimizationRun {
  std::vector<double> nodes;  // normalized, including the zero ends
  double wln = 0.0;
  double initial_wln = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

struct OptimizationResult {
  FilterFunction filter;
  double wln;
  std::vector<OptimizationRun> runs;
};

namespace detail {

struct Objective {
  const SystemParams* params;
  const OptimizerConfig* cfg;
  int evaluations = 0;

  // Interior node values → full node vector on the unit sphere.
  std::vector<double> project(const gsl_vector* x) const {
    const int n = cfg->n_points;
    std::vector<double> nodes(static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i < n - 1; ++i) nodes[static_cast<std::size_t>(i)] = gsl_vector_get(x, static_cast<std::size_t>(i - 1));
    return nodes;
  }

  double wln_of(const std::vector<double>& nodes) {
    ++evaluations;
    try {
      const FilterFunction f = node_filter(nodes, cfg->t_start, cfg->t_end);
      return evaluate_point(*params, f, cfg->point).metrics.wln;
    } catch (const KpoError&) {
      // a degenerate or unresolvable candidate scores as Wigner-positive
      return 0.0;
    }
  }

  static double call(const gsl_vector* x, void* self) {
    auto* o = static_cast<Objective*>(self);
    std::vector<double> nodes = o->project(x);
    double norm = 0.0;
    for (double v : nodes) norm += v * v;
    if (!(norm > 1e-300)) return 0.0;
    return -o->wln_of(nodes);
  }
};

inline std::vector<double> normalized_nodes(std::vector<double> nodes, double t_start, double t_end) {
  const FilterFunction f = node_filter(nodes, t_start, t_end);
  const int refine = node_refinement(static_cast<int>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = f.samples()[k * static_cast<std::size_t>(refine)];
  return nodes;
}

struct MinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};

}  // namespace detail

/// Random start of one restart: interior nodes uniform in [0, 1], zero ends,
/// unit norm.
inline std::vector<double> initial_nodes(const OptimizerConfig& cfg, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> start(static_cast<std::size_t>(cfg.n_points), 0.0);
  for (int i = 1; i < cfg.n_points - 1; ++i) start[static_cast<std::size_t>(i)] = uni(rng);
  return detail::normalized_nodes(start, cfg.t_start, cfg.t_end);
}

namespace detail {

inline OptimizationRun optimize_once(const SystemParams& params, const OptimizerConfig& cfg, unsigned seed) {
  const int n_free = cfg.n_points - 2;
  const std::vector<double> start = initial_nodes(cfg, seed);

  Objective obj{&params, &cfg};
  std::unique_ptr<gsl_vector, VectorDeleter> x(gsl_vector_alloc(static_cast<std::size_t>(n_free)));
  std::unique_ptr<gsl_vector, VectorDeleter> step(gsl_vector_alloc(static_cast<std::size_t>(n_free)));
  for (int i = 0; i < n_free; ++i) gsl_vector_set(x.get(), static_cast<std::size_t>(i), start[static_cast<std::size_t>(i + 1)]);
  gsl_vector_set_all(step.get(), cfg.initial_step);

  gsl_multimin_function fn{&Objective::call, static_cast<std::size_t>(n_free), &obj};
  std::unique_ptr<gsl_multimin_fminimizer, MinimizerDeleter> m(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, static_cast<std::size_t>(n_free)));
  const double initial = -Objective::call(x.get(), &obj);
  gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), step.get());

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), cfg.size_tol) == GSL_SUCCESS) break;
  }
  OptimizationRun run;
  run.nodes = normalized_nodes(obj.project(gsl_multimin_fminimizer_x(m.get())), cfg.t_start, cfg.t_end);
  run.initial_wln = initial;
  run.wln = obj.wln_of(run.nodes);
  run.iterations = iter;
  run.evaluations = obj.evaluations;
  return run;
}

}  // namespace detail

/// Best-of-restarts filter maximizing the WLN of the extracted mode. Every
/// candidate is projected onto zero end nodes and unit norm before it is
/// evaluated. Restart r uses seed + r.
inline OptimizationResult optimize_filter(const SystemParams& params, const OptimizerConfig& cfg) {
  cfg.validate();
  gsl_set_error_handler_off();
  std::vector<OptimizationRun> runs(static_cast<std::size_t>(cfg.restarts));
  parallel_for(runs.size(), cfg.workers, [&](std::size_t r) {
    runs[r] = detail::optimize_once(params, cfg, cfg.seed + static_cast<unsigned>(r));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].wln > runs[best].wln) best = r;
  bool improved = false;
  for (const auto& r : runs) improved = improved || r.wln > r.initial_wln;
  if (!improved) throw OptimizerStall("optimize_filter: no restart improved on its initial filter");
  return {node_filter(runs[best].nodes, cfg.t_start, cfg.t_end), runs[best].wln, std::move(runs)};
}

// ---------------------------------------------------------------------------
// Gaussian profile fit

struct GaussianFit {
  double amplitude;
  double mu;
  double sigma;
  double rms;
};

namespace detail {

struct FitData {
  std::vector<double> t, y;
};

inline int gauss_f(const gsl_vector* p, void* data, gsl_vector* r) {
  const auto* d = static_cast<const FitData*>(data);
  const double a = gsl_vector_get(p, 0), mu = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->t.size(); ++i) {
    const double z = (d->t[i] - mu) / s;
    gsl_vector_set(r, i, a * std::exp(-0.5 * z * z) - d->y[i]);
  }
  return GSL_SUCCESS;
}

inline int gauss_df(const gsl_vector* p, void* data, gsl_matrix* jac) {
  const auto* d = static_cast<const FitData*>(data);
  const double a = gsl_vector_get(p, 0), mu = gsl_vector_get(p, 1), s = gsl_vector_get(p, 2);
  for (std::size_t i = 0; i < d->t.size(); ++i) {
    const double z = (d->t[i] - mu) / s;
    const double e = std::exp(-0.5 * z * z);
    gsl_matrix_set(jac, i, 0, e);
    gsl_matrix_set(jac, i, 1, a * e * z / s);
    gsl_matrix_set(jac, i, 2, a * e * z * z / s);
  }
  return GSL_SUCCESS;
}

struct WorkspaceDeleter {
  void operator()(gsl_multifit_nlinear_workspace* w) const { gsl_multifit_nlinear_free(w); }
};

}  // namespace detail

/// Least-squares fit of a·exp(−(t−μ)²/2σ²) to the filter samples over its
/// support. rms is the root-mean-square residual.
inline GaussianFit fit_gaussian_profile(const FilterFunction& f) {
  gsl_set_error_handler_off();
  detail::FitData d;
  const auto [a, b] = f.support();
  for (int i = 0; i < f.grid().points(); ++i) {
    const double t = f.grid().time(i);
    if (t < a - 1e-12 || t > b + 1e-12) continue;
    d.t.push_back(t);
    d.y.push_back(f.samples()[static_cast<std::size_t>(i)]);
  }
  if (d.t.size() < 4) throw ConfigError("fit_gaussian_profile: too few samples in the support");

  // moment estimates of |f|² as the starting point
  double w = 0.0, m1 = 0.0, m2 = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < d.t.size(); ++i) {
    const double q = d.y[i] * d.y[i];
    w += q;
    m1 += q * d.t[i];
    if (std::abs(d.y[i]) > std::abs(peak)) peak = d.y[i];
  }
  m1 /= w;
  for (std::size_t i = 0; i < d.t.size(); ++i) m2 += d.y[i] * d.y[i] * (d.t[i] - m1) * (d.t[i] - m1);
  // |f|² has width σ/√2
  const double s0 = std::max(std::sqrt(2.0 * m2 / w), 1e-3 * (b - a));

  gsl_multifit_nlinear_fdf fdf{};
  fdf.f = &detail::gauss_f;
  fdf.df = &detail::gauss_df;
  fdf.n = d.t.size();
  fdf.p = 3;
  fdf.params = &d;
  gsl_multifit_nlinear_parameters fp = gsl_multifit_nlinear_default_parameters();
  std::unique_ptr<gsl_multifit_nlinear_workspace, detail::WorkspaceDeleter> ws(
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &fp, d.t.size(), 3));
  std::unique_ptr<gsl_vector, detail::VectorDeleter> p0(gsl_vector_alloc(3));
  gsl_vector_set(p0.get(), 0, peak);
  gsl_vector_set(p0.get(), 1, m1);
  gsl_vector_set(p0.get(), 2, s0);
  gsl_multifit_nlinear_init(p0.get(), &fdf, ws.get());
  int info = 0;
  gsl_multifit_nlinear_driver(500, 1e-12, 1e-12, 1e-12, nullptr, nullptr, &info, ws.get());

  const gsl_vector* p = gsl_multifit_nlinear_position(ws.get());
  const gsl_vector* r = gsl_multifit_nlinear_residual(ws.get());
  double ss = 0.0;
  for (std::size_t i = 0; i < r->size; ++i) ss += gsl_vector_get(r, i) * gsl_vector_get(r, i);
  return {gsl_vector_get(p, 0), gsl_vector_get(p, 1), std::abs(gsl_vector_get(p, 2)), std::sqrt(ss / static_cast<double>(r->size))};
}

}  // namespace kpo::harness
