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

// Figure-data pipelines. Each figure id writes one or more CSV files into
// an output directory and returns the tables it wrote.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/gaussian_po.hpp"
#include "kpo/harness/io.hpp"
#include "kpo/harness/optimize.hpp"
#include "kpo/harness/pipelines.hpp"
#include "kpo/harness/sweep.hpp"

namespace kpo::harness {

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig2", "fig3", "fig4",            "fig5",        "fig6",  "fig7",
                                            "fig8", "fig9", "compare_filters", "po_klyshko", "ksweep"};
  return ids;
}

struct ReproduceOptions {
  int workers = 1;
  OptimizerConfig optimizer{};
};

using FigureData = std::map<std::string, Table>;

namespace detail {

inline std::vector<std::string> population_columns(const std::string& prefix, int n) {
  std::vector<std::string> c;
  for (int k = 0; k < n; ++k) c.push_back(prefix + std::to_string(k));
  return c;
}

inline Table records_table(const std::vector<SweepRecord>& recs) {
  ResultTable rt{recs, {}};
  return rt.table();
}

inline FigureData fig2() {
  Table t({"beta", "T", "s_output", "s_cavity", "s_cavity_numeric", "det_v"});
  for (double beta : {0.2, 0.4}) {
    const double cav = po_cavity_squeezing(beta);
    const DensityMatrix ss = cavity_steady_state(SystemParams{beta, 0.0, 1.0}, TruncationPolicy{}).rho;
    const double cav_num = squeezing_s(ss);
    for (double T : logspace(1e-2, 1e3, 121)) {
      const PoOutputPoint p = po_output_point(beta, T);
      t.add({format_double(beta), format_double(T), format_double(p.s), format_double(cav), format_double(cav_num),
             format_double(p.v.det())});
    }
  }
  return {{"squeezing", std::move(t)}};
}

inline FigureData po_populations(const std::vector<double>& Ts) {
  constexpr int kShown = 10;
  std::vector<std::string> cols{"beta", "T", "odd_total"};
  for (auto& c : population_columns("rho", kShown)) cols.push_back(c);
  Table t(cols);
  for (double beta : {0.2, 0.4}) {
    for (double T : Ts) {
      const CovarianceMatrix v = po_output_covariance_boxcar(SystemParams{beta, 0.0, 1.0}, T);
      const auto pops = photon_distribution(covariance_to_fock(v, HilbertDim(po_population_dim(v))));
      double odd = 0.0;
      for (std::size_t n = 1; n < pops.size(); n += 2) odd += pops[n];
      std::vector<std::string> row{format_double(beta), format_double(T), format_double(odd)};
      for (int n = 0; n < kShown; ++n) row.push_back(format_double(pops[static_cast<std::size_t>(n)]));
      t.add(std::move(row));
    }
  }
  return {{"populations", std::move(t)}};
}

inline FigureData po_klyshko() {
  Table t({"beta", "T", "b2", "b4", "b6"});
  for (double beta : {0.2, 0.4}) {
    for (double T : logspace(1e-1, 1e2, 61)) {
      const CovarianceMatrix v = po_output_covariance_boxcar(SystemParams{beta, 0.0, 1.0}, T);
      const auto pops = photon_distribution(covariance_to_fock(v, HilbertDim(po_population_dim(v))));
      t.add({format_double(beta), format_double(T), format_double(klyshko(pops, 2)), format_double(klyshko(pops, 4)),
             format_double(klyshko(pops, 6))});
    }
  }
  Table onset({"beta", "T_onset_b2"});
  for (double beta : {0.2, 0.4}) onset.add({format_double(beta), format_double(po_klyshko_onset(beta))});
  return {{"klyshko", std::move(t)}, {"onset", std::move(onset)}};
}

inline FigureData two_photon_figure(double kerr, const std::vector<double>& Ts, const ReproduceOptions& o) {
  ScanOptions so{o.workers, {}};
  FigureData out;
  Table peaks({"T", "beta_peak", "rho2_peak", "poisson_lambda", "poisson_rms"});
  Table dists({"T", "n", "rho", "poisson"});
  std::vector<SweepRecord> all;
  for (double T : Ts) {
    const PeakResult p = peak_two_photon(kerr, T, peak_scan_grid(kerr, T, 14), so);
    peaks.add({format_double(T), format_double(p.beta), format_double(p.metrics.population(2)), format_double(p.fit.lambda),
               format_double(p.fit.rms_residual)});
    for (std::size_t n = 0; n < p.metrics.populations.size(); ++n)
      dists.add({format_double(T), std::to_string(n), format_double(p.metrics.populations[n]),
                 format_double(poisson_probability(p.fit.lambda, static_cast<int>(n)))});
    all.insert(all.end(), p.scan.begin(), p.scan.end());
  }
  out.emplace("peaks", std::move(peaks));
  out.emplace("distributions", std::move(dists));
  out.emplace("scan", records_table(all));
  return out;
}

inline FigureData fig6(const ReproduceOptions&) {
  const SystemParams p{0.65, 0.5, 1.0};
  FigureData out;
  Table summary({"state", "wln", "purity", "n_mean", "b2"});
  auto emit = [&](const std::string& name, const DensityMatrix& rho) {
    const MetricsRecord m = compute_metrics(rho);
    summary.add({name, format_double(m.wln), format_double(m.purity), format_double(m.n_mean), format_double(m.b(2))});
    const WignerField w = wigner(rho, default_grid(rho, 161));
    Table wt({"x", "p", "w"});
    for (int i = 0; i < w.grid.n_x; ++i)
      for (int j = 0; j < w.grid.n_p; ++j)
        wt.add({format_double(w.grid.x(i)), format_double(w.grid.p(j)), format_double(w.values(i, j))});
    out.emplace("wigner_" + name, std::move(wt));
    Table dm({"m", "n", "re", "im"});
    for (int i = 0; i < rho.dim(); ++i)
      for (int j = 0; j < rho.dim(); ++j)
        dm.add({std::to_string(i), std::to_string(j), format_double(rho.matrix()(i, j).real()), format_double(rho.matrix()(i, j).imag())});
    out.emplace("rho_" + name, std::move(dm));
  };
  emit("cavity", cavity_steady_state(p, TruncationPolicy{}).rho);
  emit("boxcar_T2.5", extract(p, make_filter(FilterKind::boxcar, 2.5)).mode);
  emit("boxcar_T5", extract(p, make_filter(FilterKind::boxcar, 5.0)).mode);
  out.emplace("summary", std::move(summary));
  return out;
}

inline FigureData fig7(const ReproduceOptions& o) {
  ScanOptions so{o.workers, {}};
  const auto betas = arange(0.1, 1.0, 0.05);
  std::vector<SweepRecord> map;
  for (double T : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}) {
    auto row = beta_scan(0.5, FilterKind::boxcar, T, betas, so);
    map.insert(map.end(), row.begin(), row.end());
  }
  FigureData out;
  out.emplace("wln_map", records_table(map));
  std::vector<SweepRecord> line;
  for (const auto& r : map)
    if (r.filter_param == 5.0) line.push_back(r);
  out.emplace("t5", records_table(line));
  return out;
}

inline FigureData compare_filters(const ReproduceOptions& o) {
  ScanOptions so{o.workers, {}};
  const auto betas = arange(0.1, 1.0, 0.05);
  auto box = beta_scan(0.5, FilterKind::boxcar, 5.0, betas, so);
  auto gauss = beta_scan(0.5, FilterKind::gaussian, 2.3, betas, so);
  double max_box = 0.0, max_gauss = 0.0;
  for (const auto& r : box)
    if (r.ok()) max_box = std::max(max_box, r.metrics.wln);
  for (const auto& r : gauss)
    if (r.ok()) max_gauss = std::max(max_gauss, r.metrics.wln);
  box.insert(box.end(), gauss.begin(), gauss.end());
  Table summary({"max_wln_boxcar_T5", "max_wln_gaussian_sigma2.3", "ratio"});
  summary.add({format_double(max_box), format_double(max_gauss), format_double(max_box > 0 ? max_gauss / max_box : 0.0)});
  return {{"wln", records_table(box)}, {"summary", std::move(summary)}};
}

inline FigureData fig9(const ReproduceOptions& o) {
  OptimizerConfig cfg = o.optimizer;
  cfg.workers = std::max(cfg.workers, o.workers);
  const OptimizationResult r = optimize_filter(SystemParams{0.65, 0.5, 1.0}, cfg);
  const GaussianFit fit = fit_gaussian_profile(r.filter);
  Table filter({"t", "f", "gaussian_fit"});
  for (int i = 0; i < r.filter.grid().points(); ++i) {
    const double t = r.filter.grid().time(i);
    const double z = (t - fit.mu) / fit.sigma;
    filter.add({format_double(t), format_double(r.filter.samples()[static_cast<std::size_t>(i)]),
                format_double(fit.amplitude * std::exp(-0.5 * z * z))});
  }
  Table runs({"restart", "initial_wln", "wln", "iterations", "evaluations"});
  for (std::size_t k = 0; k < r.runs.size(); ++k)
    runs.add({std::to_string(k), format_double(r.runs[k].initial_wln), format_double(r.runs[k].wln),
              std::to_string(r.runs[k].iterations), std::to_string(r.runs[k].evaluations)});
  Table summary({"wln", "mu", "sigma", "fit_rms"});
  summary.add({format_double(r.wln), format_double(fit.mu), format_double(fit.sigma), format_double(fit.rms)});
  return {{"filter", std::move(filter)}, {"restarts", std::move(runs)}, {"summary", std::move(summary)}};
}

inline FigureData ksweep(const ReproduceOptions& o) {
  ScanOptions so{o.workers, {}};
  Table t({"kerr", "beta", "T", "b2_min"});
  for (double k : {0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 2.0, 3.0}) {
    const KlyshkoMinimum m = klyshko_minimum(k, {0.6, 0.8, 1.0, 1.2, 1.4, 1.7, 2.0}, {2.0, 3.0, 4.0, 5.0, 6.0, 8.0}, so);
    t.add({format_double(k), format_double(m.beta), format_double(m.T), format_double(m.b2)});
  }
  return {{"b2_min", std::move(t)}};
}

}  // namespace detail

/// Computes the data behind `figure` and writes `<figure>_<table>.csv` files
/// into `outdir`.
inline FigureData reproduce(const std::string& figure, const std::string& outdir, const ReproduceOptions& opts = {}) {
  FigureData data;
  if (figure == "fig2") {
    data = detail::fig2();
  } else if (figure == "fig3") {
    data = detail::po_populations(logspace(1e-2, 5e2, 81));
  } else if (figure == "fig4") {
    data = detail::two_photon_figure(0.1, {0.1, 0.5, 1.0}, opts);
  } else if (figure == "fig5") {
    data = detail::two_photon_figure(0.5, {0.5, 2.0, 5.0}, opts);
  } else if (figure == "fig6") {
    data = detail::fig6(opts);
  } else if (figure == "fig7") {
    data = detail::fig7(opts);
  } else if (figure == "fig8" || figure == "compare_filters") {
    data = detail::compare_filters(opts);
  } else if (figure == "fig9") {
    data = detail::fig9(opts);
  } else if (figure == "po_klyshko") {
    data = detail::po_klyshko();
  } else if (figure == "ksweep") {
    data = detail::ksweep(opts);
  } else {
    throw ConfigError("reproduce: unknown figure '" + figure + "'");
  }
  std::filesystem::create_directories(outdir);
  const Provenance prov{KPO_GIT_HASH, hex64(fnv1a(figure)), utc_timestamp()};
  for (const auto& [name, table] : data) table.write((std::filesystem::path(outdir) / (figure + "_" + name + ".csv")).string(), &prov);
  return data;
}

}  // namespace kpo::harness
