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


// Command-line front end: steady, extract, sweep, optimize-filter,
// reproduce and wigner.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "kpo/kpo.hpp"

namespace {

using namespace kpo;
using namespace kpo::harness;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SteadyArgs {
  double beta = 0.0;
  double kerr = 0.0;
  double gamma = 1.0;
  std::string out;
};

struct ExtractArgs {
  double beta = 0.0;
  double kerr = 0.0;
  double gamma = 1.0;
  std::string filter;
  std::optional<double> T;
  std::optional<double> mu;
  std::optional<double> sigma;
  std::string path;
  std::string out;
  std::string metrics;
};

struct SweepArgs {
  std::string config;
  std::string out;
  int workers = default_workers();
};

struct OptimizeArgs {
  double beta = 0.0;
  double kerr = 0.0;
  OptimizerConfig cfg;
  std::string out;
};

struct ReproduceArgs {
  std::string figure;
  std::string outdir;
  ReproduceOptions opts;
};

struct WignerArgs {
  std::string state;
  std::string grid;
  std::string out;
};

json params_json(const SystemParams& p) { return {{"beta", p.beta.real()}, {"kerr", p.kerr}, {"gamma", p.gamma}}; }

void run_steady(const SteadyArgs& a) {
  const SystemParams p{a.beta, a.kerr, a.gamma};
  p.validate();
  const CavitySteadyState ss = cavity_steady_state(p);
  write_state(a.out, ss.rho, {{"kind", "cavity_steady_state"}, {"params", params_json(p)}});
  std::cout << "steady state: dim " << ss.rho.dim() << ", <n> = " << mean_photon_number(ss.rho) << '\n';
}

FilterFunction extraction_filter(const ExtractArgs& a) {
  switch (parse_filter_kind(a.filter)) {
    case FilterKind::boxcar:
      if (!a.T) throw ConfigError("extract: boxcar needs --T");
      return make_filter(FilterKind::boxcar, *a.T);
    case FilterKind::gaussian: {
      if (!a.sigma) throw ConfigError("extract: gaussian needs --sigma");
      if (!a.mu) return make_filter(FilterKind::gaussian, *a.sigma);
      const double s = *a.sigma;
      const double t1 = *a.mu + 5.0 * s;
      if (!(s > 0.0) || !(t1 > 0.0)) throw ConfigError("extract: need sigma > 0 and mu + 5 sigma > 0");
      const int n = std::max(10, static_cast<int>(std::lround(t1 / std::min(kGaussianDt, s / 10.0))));
      return gaussian_filter(*a.mu, s, std::max(0.0, *a.mu - 5.0 * s), TimeGrid(0.0, t1, n));
    }
    case FilterKind::custom:
      if (a.path.empty()) throw ConfigError("extract: file filter needs --path");
      return read_filter_csv(a.path);
  }
  throw ConfigError("extract: unknown filter");
}

void run_extract(const ExtractArgs& a) {
  const SystemParams p{a.beta, a.kerr, a.gamma};
  p.validate();
  const FilterFunction f = extraction_filter(a);
  const PointResult r = evaluate_point(p, f);
  write_state(a.out, r.state, {{"kind", "output_mode"}, {"params", params_json(p)}, {"filter", a.filter}});
  if (!a.metrics.empty()) open_out(a.metrics) << metrics_to_json(r.metrics).dump(2) << '\n';
  std::cout << "output mode: dim " << r.state.dim() << ", <n> = " << r.metrics.n_mean << ", WLN = " << r.metrics.wln
            << ", purity = " << r.metrics.purity << '\n';
}

void run_sweep_cmd(const SweepArgs& a) {
  const SweepConfig cfg = read_sweep_config(a.config);
  const ResultTable t = run_sweep(cfg, a.workers);
  const std::string out = a.out.empty() ? cfg.output : a.out;
  if (out.empty()) throw ConfigError("sweep: no output path");
  t.write_csv(out);
  std::size_t failed = 0;
  for (const auto& r : t.records) failed += r.ok() ? 0 : 1;
  std::cout << t.records.size() << " records, " << failed << " failed -> " << out << '\n';
}

void run_optimize(const OptimizeArgs& a) {
  const OptimizationResult r = optimize_filter(SystemParams{a.beta, a.kerr, 1.0}, a.cfg);
  write_filter_csv(r.filter, a.out);
  const GaussianFit fit = fit_gaussian_profile(r.filter);
  std::cout << "WLN = " << r.wln << ", gaussian fit mu = " << fit.mu << ", sigma = " << fit.sigma << '\n';
}

void run_reproduce(const ReproduceArgs& a) {
  const FigureData data = reproduce(a.figure, a.outdir, a.opts);
  for (const auto& [name, table] : data) std::cout << a.outdir << '/' << a.figure << '_' << name << ".csv\n";
}

void run_wigner(const WignerArgs& a) {
  std::istringstream in(a.grid);
  double half = 0.0;
  char comma = 0;
  int n = 0;
  if (!(in >> half >> comma >> n) || comma != ',') throw ConfigError("wigner: --grid expects L,N");
  const DensityMatrix rho = read_state(a.state);
  write_wigner_csv(a.out, wigner(rho, QuadratureGrid::square(half, n), false));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kerr parametric oscillator output-state toolkit"};
  app.require_subcommand(1);

  SteadyArgs steady;
  auto* s = app.add_subcommand("steady", "cavity steady state");
  s->add_option("--beta", steady.beta, "two-photon drive")->required();
  s->add_option("--kerr", steady.kerr, "Kerr constant")->required();
  s->add_option("--gamma", steady.gamma, "decay rate");
  s->add_option("--out", steady.out, "state JSON")->required();

  ExtractArgs ext;
  auto* e = app.add_subcommand("extract", "state of a filtered output mode");
  e->add_option("--beta", ext.beta)->required();
  e->add_option("--kerr", ext.kerr)->required();
  e->add_option("--gamma", ext.gamma);
  e->add_option("--filter", ext.filter)->required()->check(CLI::IsMember({"boxcar", "gaussian", "file"}));
  e->add_option("--T", ext.T, "boxcar width");
  e->add_option("--mu", ext.mu, "gaussian centre");
  e->add_option("--sigma", ext.sigma, "gaussian width");
  e->add_option("--path", ext.path, "filter CSV (t,f)");
  e->add_option("--out", ext.out, "state JSON")->required();
  e->add_option("--metrics", ext.metrics, "metrics JSON");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "parameter sweep");
  w->add_option("--config", sw.config)->required();
  w->add_option("--out", sw.out);
  w->add_option("--workers", sw.workers)->check(CLI::PositiveNumber);

  OptimizeArgs opt;
  auto* o = app.add_subcommand("optimize-filter", "maximize WLN over the filter shape");
  o->add_option("--beta", opt.beta)->required();
  o->add_option("--kerr", opt.kerr)->required();
  o->add_option("--points", opt.cfg.n_points);
  o->add_option("--seed", opt.cfg.seed);
  o->add_option("--restarts", opt.cfg.restarts);
  o->add_option("--max-iters", opt.cfg.max_iters);
  o->add_option("--t-start", opt.cfg.t_start);
  o->add_option("--t-end", opt.cfg.t_end);
  o->add_option("--workers", opt.cfg.workers)->check(CLI::PositiveNumber);
  o->add_option("--out", opt.out)->required();

  ReproduceArgs rep;
  rep.opts.workers = default_workers();
  auto* r = app.add_subcommand("reproduce", "figure data as CSV");
  r->add_option("--figure", rep.figure)->required()->check(CLI::IsMember(figure_ids()));
  r->add_option("--outdir", rep.outdir)->required();
  r->add_option("--workers", rep.opts.workers)->check(CLI::PositiveNumber);
  r->add_option("--points", rep.opts.optimizer.n_points, "optimizer nodes (fig9)");
  r->add_option("--restarts", rep.opts.optimizer.restarts, "optimizer restarts (fig9)");
  r->add_option("--seed", rep.opts.optimizer.seed, "optimizer seed (fig9)");

  WignerArgs wg;
  auto* g = app.add_subcommand("wigner", "Wigner function of a stored state");
  g->add_option("--state", wg.state)->required();
  g->add_option("--grid", wg.grid, "half-width and points per axis, L,N")->required();
  g->add_option("--out", wg.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) run_steady(steady);
    if (*e) run_extract(ext);
    if (*w) run_sweep_cmd(sw);
    if (*o) run_optimize(opt);
    if (*r) run_reproduce(rep);
    if (*g) run_wigner(wg);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitNumerical;
  }
  return EXIT_SUCCESS;
}
