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

// Parameter sweeps over (β, K, filter) with a deterministic worker pool.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kpo/dynamics.hpp"
#include "kpo/errors.hpp"
#include "kpo/filter.hpp"
#include "kpo/harness/io.hpp"
#include "kpo/nonclassicality.hpp"
#include "kpo/pulse_io.hpp"

namespace kpo::harness {

// ---------------------------------------------------------------------------
// Worker pool

/// Worker count from KPO_WORKERS, else 1.
inline int default_workers() {
  if (const char* env = std::getenv("KPO_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

/// Runs fn(i) for i in [0, n) on `workers` threads. The first exception is
/// rethrown after all workers have stopped.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Filters from a (kind, parameter) pair

inline constexpr double kBoxcarDt = 0.01;
inline constexpr double kGaussianDt = 0.05;

inline FilterKind parse_filter_kind(const std::string& s) {
  if (s == "boxcar") return FilterKind::boxcar;
  if (s == "gaussian") return FilterKind::gaussian;
  if (s == "custom" || s == "file") return FilterKind::custom;
  throw ConfigError("unknown filter kind '" + s + "'");
}

/// Boxcar of width `param` or Gaussian of width σ = `param` (centred 5σ after
/// the onset on a 10σ window), starting at t_on.
inline FilterFunction make_filter(FilterKind kind, double param, double t_on = 0.0, double dt = 0.0) {
  if (!(t_on >= 0.0)) throw GridError("make_filter: onset must be ≥ 0");
  switch (kind) {
    case FilterKind::boxcar: {
      if (dt <= 0.0) dt = std::min(kBoxcarDt, param / 10.0);
      const double t1 = t_on + param;
      const int n = std::max(10, static_cast<int>(std::lround(t1 / dt)));
      return boxcar_filter(param, t_on, TimeGrid(0.0, t1, n));
    }
    case FilterKind::gaussian: {
      if (dt <= 0.0) dt = std::min(kGaussianDt, param / 10.0);
      const double t1 = t_on + 10.0 * param;
      const int n = std::max(10, static_cast<int>(std::lround(t1 / dt)));
      return gaussian_filter(t_on + 5.0 * param, param, t_on, TimeGrid(0.0, t1, n));
    }
    case FilterKind::custom:
      break;
  }
  throw ConfigError("make_filter: custom filters are read from a file");
}

// ---------------------------------------------------------------------------
// Configuration

struct FilterSpec {
  FilterKind kind = FilterKind::boxcar;
  std::vector<double> params;  // T for boxcar, σ for gaussian
  double t_on = 0.0;
  double dt = 0.0;  // 0 selects the default spacing
  std::string path;  // custom filters
};

struct SweepConfig {
  std::vector<double> beta_grid;
  std::vector<double> kerr_grid;
  double gamma = 1.0;
  std::vector<FilterSpec> filters;
  ExtractionDims dims{};
  TruncationPolicy cavity_policy{};
  double rel_tol = 1e-7;
  int wigner_points = 201;
  std::string output;
  json source = json::object();

  void validate() const {
    if (beta_grid.empty()) throw ConfigError("sweep: beta_grid is empty");
    if (kerr_grid.empty()) throw ConfigError("sweep: kerr_grid is empty");
    if (filters.empty()) throw ConfigError("sweep: no filters");
    if (!(gamma > 0.0)) throw ConfigError("sweep: gamma must be positive");
    for (double k : kerr_grid) {
      if (!(k >= 0.0)) throw ConfigError("sweep: Kerr constants must be ≥ 0");
      if (k == 0.0) {
        for (double b : beta_grid)
          if (std::abs(b) >= 0.5 * gamma) throw ThresholdError("sweep: β at or above threshold γ/2 with K = 0");
      }
    }
    for (const auto& f : filters) {
      if (f.kind == FilterKind::custom) {
        if (f.path.empty()) throw ConfigError("sweep: custom filter needs a path");
      } else if (f.params.empty()) {
        throw ConfigError("sweep: filter '" + to_string(f.kind) + "' has an empty parameter grid");
      }
      for (double p : f.params)
        if (!(p > 0.0)) throw ConfigError("sweep: filter parameters must be positive");
    }
  }

  std::string hash() const { return hex64(fnv1a(source.dump())); }
};

/// Accepts a list of numbers or {"start", "stop", "step"} (inclusive).
inline std::vector<double> parse_grid(const json& j, const std::string& name) {
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& e : j) v.push_back(e.get<double>());
    return v;
  }
  if (j.is_number()) return {j.get<double>()};
  if (j.is_object()) {
    const double a = j.at("start").get<double>();
    const double b = j.at("stop").get<double>();
    const double h = j.at("step").get<double>();
    if (!(h > 0.0) || b < a) throw ConfigError("sweep: bad range for '" + name + "'");
    const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
    std::vector<double> v;
    // rounded so that 0.1 + 2·0.05 prints as 0.2
    for (long i = 0; i <= n; ++i) v.push_back(std::round((a + static_cast<double>(i) * h) * 1e9) / 1e9);
    return v;
  }
  throw ConfigError("sweep: '" + name + "' must be a list or a range");
}

inline SweepConfig sweep_config_from_json(const json& j) {
  try {
    SweepConfig c;
    c.source = j;
    c.beta_grid = parse_grid(j.at("beta_grid"), "beta_grid");
    c.kerr_grid = parse_grid(j.at("kerr_grid"), "kerr_grid");
    c.gamma = j.value("gamma", 1.0);
    for (const auto& f : j.at("filters")) {
      FilterSpec s;
      s.kind = parse_filter_kind(f.at("kind").get<std::string>());
      if (f.contains("params")) s.params = parse_grid(f.at("params"), "params");
      s.t_on = f.value("t_on", 0.0);
      s.dt = f.value("dt", 0.0);
      s.path = f.value("path", std::string());
      c.filters.push_back(std::move(s));
    }
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      c.dims.cavity = d.value("cavity", 0);
      c.dims.mode = d.value("mode", 0);
      c.cavity_policy.tail_tol = d.value("tail_tol", c.cavity_policy.tail_tol);
      c.cavity_policy.max_dim = d.value("max_cavity", c.cavity_policy.max_dim);
    }
    if (j.contains("tolerances")) {
      const auto& t = j["tolerances"];
      c.rel_tol = t.value("rel_tol", c.rel_tol);
      c.wigner_points = t.value("wigner_points", c.wigner_points);
    }
    c.output = j.value("output", std::string());
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
}

inline SweepConfig read_sweep_config(const std::string& path) {
  try {
    return sweep_config_from_json(json::parse(slurp(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("sweep config '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Records

struct SweepRecord {
  double beta = 0.0;
  double kerr = 0.0;
  std::string filter_kind;
  double filter_param = 0.0;
  MetricsRecord metrics;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

inline constexpr int kReportedPopulations = 10;

inline std::vector<std::string> result_columns() {
  std::vector<std::string> c{"beta", "kerr", "filter_kind", "filter_param", "s", "b2", "b4", "b6", "wln", "purity", "n_mean"};
  for (int n = 0; n < kReportedPopulations; ++n) c.push_back("rho" + std::to_string(n));
  c.push_back("status");
  return c;
}

struct ResultTable {
  std::vector<SweepRecord> records;
  Provenance provenance;

  Table table() const {
    Table t(result_columns());
    for (const auto& r : records) {
      const auto& m = r.metrics;
      auto num = [&](double v) { return r.ok() ? format_double(v) : std::string(); };
      std::vector<std::string> row{format_double(r.beta), format_double(r.kerr), r.filter_kind, format_double(r.filter_param),
                                   num(m.s),         num(m.b(2)),        num(m.b(4)),  num(m.b(6)),
                                   num(m.wln),       num(m.purity),      num(m.n_mean)};
      for (int n = 0; n < kReportedPopulations; ++n) row.push_back(num(m.population(n)));
      row.push_back(r.status);
      t.add(std::move(row));
    }
    return t;
  }

  void write_csv(const std::string& path) const { table().write(path, &provenance); }
};

/// Short label of an exception for the status column.
inline std::string error_status(const std::exception& e) {
  auto tag = [&]() -> std::string {
    if (dynamic_cast<const TruncationError*>(&e)) return "TruncationError";
    if (dynamic_cast<const StiffnessError*>(&e)) return "StiffnessError";
    if (dynamic_cast<const DegenerateSteadyState*>(&e)) return "DegenerateSteadyState";
    if (dynamic_cast<const SteadyStateNotReached*>(&e)) return "SteadyStateNotReached";
    if (dynamic_cast<const InvalidState*>(&e)) return "InvalidState";
    if (dynamic_cast<const GridError*>(&e)) return "GridError";
    if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    return "Error";
  }();
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), ',', ';');
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  return tag + ": " + msg;
}

// ---------------------------------------------------------------------------
// Evaluation

struct PointOptions {
  ExtractionDims dims{};
  ExtractionOptions extraction{};
  int wigner_points = 201;
};

struct PointResult {
  DensityMatrix state;
  MetricsRecord metrics;
};

/// Output-mode state of one filter and all its metrics.
inline PointResult evaluate_point(const SystemParams& params, const FilterFunction& filter, const PointOptions& opts = {}) {
  DensityMatrix rho = extract(params, filter, opts.dims, opts.extraction).mode;
  MetricsRecord m = compute_metrics(rho, opts.wigner_points);
  return {std::move(rho), std::move(m)};
}

struct SweepTask {
  double beta;
  double kerr;
  const FilterSpec* spec;
  double param;
};

/// One record per (β, K, filter, parameter) in config order. Failures are
/// recorded in the status column; the sweep continues.
inline ResultTable run_sweep(const SweepConfig& cfg, int workers = default_workers()) {
  cfg.validate();
  std::vector<SweepTask> tasks;
  for (double k : cfg.kerr_grid)
    for (double b : cfg.beta_grid)
      for (const auto& f : cfg.filters) {
        if (f.kind == FilterKind::custom) {
          tasks.push_back({b, k, &f, 0.0});
        } else {
          for (double p : f.params) tasks.push_back({b, k, &f, p});
        }
      }

  PointOptions opts;
  opts.dims = cfg.dims;
  opts.extraction.rel_tol = cfg.rel_tol;
  opts.extraction.cavity_policy = cfg.cavity_policy;
  opts.wigner_points = cfg.wigner_points;

  std::vector<SweepRecord> records(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const SweepTask& t = tasks[i];
    SweepRecord& r = records[i];
    r.beta = t.beta;
    r.kerr = t.kerr;
    r.filter_kind = to_string(t.spec->kind);
    r.filter_param = t.param;
    try {
      const FilterFunction f = t.spec->kind == FilterKind::custom ? read_filter_csv(t.spec->path)
                                                                  : make_filter(t.spec->kind, t.param, t.spec->t_on, t.spec->dt);
      if (t.spec->kind == FilterKind::custom) r.filter_param = f.support().second - f.support().first;
      r.metrics = evaluate_point(SystemParams{t.beta, t.kerr, cfg.gamma}, f, opts).metrics;
    } catch (const KpoError& e) {
      r.status = error_status(e);
    }
  });
  return {std::move(records), Provenance{KPO_GIT_HASH, cfg.hash(), utc_timestamp()}};
}

}  // namespace kpo::harness
