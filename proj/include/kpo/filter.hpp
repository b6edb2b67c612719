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

// Temporal filter functions f(t) defining a wave-packet mode of the output.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kpo/errors.hpp"

namespace kpo {

/// Uniform grid t_i = t0 + i·dt, i = 0..n_steps.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 100;

  TimeGrid() = default;
  TimeGrid(double a, double b, int n) : t0(a), t1(b), n_steps(n) { validate(); }

  /// Grid on [a, b] with spacing as close as possible to `dt`.
  static TimeGrid with_spacing(double a, double b, double dt) {
    if (!(dt > 0.0)) throw GridError("TimeGrid: spacing must be positive");
    return TimeGrid(a, b, std::max(10, static_cast<int>(std::lround((b - a) / dt))));
  }

  void validate() const {
    if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) throw GridError("TimeGrid: need t1 > t0");
    if (n_steps < 10) throw GridError("TimeGrid: need at least 10 steps");
  }

  double dt() const { return (t1 - t0) / n_steps; }
  double time(int i) const { return t0 + i * dt(); }
  int points() const { return n_steps + 1; }
};

enum class FilterKind { boxcar, gaussian, custom };

inline std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::boxcar: return "boxcar";
    case FilterKind::gaussian: return "gaussian";
    case FilterKind::custom: return "custom";
  }
  return "custom";
}

/// How samples are turned into a continuous profile. Piecewise-constant
/// cells [t_i, t_{i+1}) take the left sample, so a boxcar is exact; linear
/// interpolation joins the nodes.
enum class Interpolation { piecewise_constant, linear };

inline constexpr double kFilterNormTol = 1e-9;

/// Real, normalized temporal profile sampled on a TimeGrid. The norm is the
/// exact ∫f² of the continuous profile implied by the interpolation rule.
class FilterFunction {
 public:
  FilterFunction(TimeGrid grid, std::vector<double> samples, double t_on, FilterKind kind, Interpolation interp,
                 std::vector<double> params = {})
      : grid_(grid), samples_(std::move(samples)), t_on_(t_on), kind_(kind), interp_(interp), params_(std::move(params)) {
    grid_.validate();
    if (static_cast<int>(samples_.size()) != grid_.points()) throw GridError("FilterFunction: need one sample per grid point");
    for (double v : samples_)
      if (!std::isfinite(v)) throw ConfigError("FilterFunction: non-finite sample");
    const double tol = 1e-9 * grid_.dt();
    for (int i = 0; i < grid_.points(); ++i)
      if (grid_.time(i) < t_on_ - tol) samples_[static_cast<std::size_t>(i)] = 0.0;
    if (interp_ == Interpolation::piecewise_constant) samples_.back() = 0.0;
    const double n = raw_norm();
    if (!(n > 0.0)) throw ConfigError("FilterFunction: profile is identically zero");
    const double s = 1.0 / std::sqrt(n);
    for (double& v : samples_) v *= s;
    build_cumulative();
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& samples() const { return samples_; }
  double t_on() const { return t_on_; }
  FilterKind kind() const { return kind_; }
  Interpolation interpolation() const { return interp_; }
  /// Shape parameters: {T} for a boxcar, {μ, σ} for a Gaussian.
  const std::vector<double>& params() const { return params_; }

  /// Representative scalar for tables: T for a boxcar, σ for a Gaussian.
  double primary_param() const {
    if (kind_ == FilterKind::boxcar && !params_.empty()) return params_[0];
    if (kind_ == FilterKind::gaussian && params_.size() >= 2) return params_[1];
    return std::numeric_limits<double>::quiet_NaN();
  }

  double value(double t) const {
    if (t < grid_.t0 || t > grid_.t1) return 0.0;
    auto [i, s] = locate(t);
    if (interp_ == Interpolation::piecewise_constant) return samples_[static_cast<std::size_t>(i)];
    const double a = samples_[static_cast<std::size_t>(i)];
    const double b = samples_[static_cast<std::size_t>(i + 1)];
    return a + (b - a) * s / grid_.dt();
  }

  /// ∫_{t0}^{t} f(t')² dt', exact for the interpolated profile.
  double running_norm(double t) const {
    if (t <= grid_.t0) return 0.0;
    if (t >= grid_.t1) return cumulative_.back();
    auto [i, s] = locate(t);
    return cumulative_[static_cast<std::size_t>(i)] + segment_norm(i, s);
  }

  double norm() const { return cumulative_.back(); }

  /// ∫ f dt.
  double integral() const {
    const double dt = grid_.dt();
    double acc = 0.0;
    for (int i = 0; i < grid_.n_steps; ++i) {
      const double a = samples_[static_cast<std::size_t>(i)];
      acc += interp_ == Interpolation::piecewise_constant ? a * dt : 0.5 * (a + samples_[static_cast<std::size_t>(i + 1)]) * dt;
    }
    return acc;
  }

  /// First and last time at which the profile can be nonzero.
  std::pair<double, double> support() const {
    int first = -1, last = -1;
    for (int i = 0; i < grid_.points(); ++i) {
      if (samples_[static_cast<std::size_t>(i)] != 0.0) {
        if (first < 0) first = i;
        last = i;
      }
    }
    if (interp_ == Interpolation::piecewise_constant) return {grid_.time(first), grid_.time(last + 1)};
    return {grid_.time(std::max(0, first - 1)), grid_.time(std::min(grid_.n_steps, last + 1))};
  }

  /// Times where the profile or its slope jumps and an integrator should
  /// restart. Kinks of densely sampled linear profiles are left out.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    const auto [a, b] = support();
    out.push_back(a);
    if (interp_ == Interpolation::piecewise_constant) {
      for (int i = 1; i < grid_.n_steps; ++i)
        if (samples_[static_cast<std::size_t>(i)] != samples_[static_cast<std::size_t>(i - 1)]) out.push_back(grid_.time(i));
    } else {
      const int nodes = static_cast<int>(std::lround((b - a) / grid_.dt()));
      if (nodes <= 64)
        for (int i = 0; i < grid_.points(); ++i)
          if (grid_.time(i) > a && grid_.time(i) < b) out.push_back(grid_.time(i));
    }
    out.push_back(b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Σ f(t_i)² dt over the samples.
  double sample_norm() const {
    double acc = 0.0;
    const int n = interp_ == Interpolation::piecewise_constant ? grid_.n_steps : grid_.points();
    for (int i = 0; i < n; ++i) acc += samples_[static_cast<std::size_t>(i)] * samples_[static_cast<std::size_t>(i)];
    return acc * grid_.dt();
  }

  FilterFunction negated() const {
    std::vector<double> s = samples_;
    for (double& v : s) v = -v;
    return FilterFunction(grid_, std::move(s), t_on_, kind_, interp_, params_);
  }

 private:
  std::pair<int, double> locate(double t) const {
    const double dt = grid_.dt();
    int i = static_cast<int>(std::floor((t - grid_.t0) / dt));
    i = std::clamp(i, 0, grid_.n_steps - 1);
    return {i, std::clamp(t - grid_.time(i), 0.0, dt)};
  }

  // ∫ over [t_i, t_i + s] of f².
  double segment_norm(int i, double s) const {
    const double a = samples_[static_cast<std::size_t>(i)];
    if (interp_ == Interpolation::piecewise_constant) return a * a * s;
    const double slope = (samples_[static_cast<std::size_t>(i + 1)] - a) / grid_.dt();
    return a * a * s + a * slope * s * s + slope * slope * s * s * s / 3.0;
  }

  double raw_norm() const {
    double acc = 0.0;
    for (int i = 0; i < grid_.n_steps; ++i) acc += segment_norm(i, grid_.dt());
    return acc;
  }

  void build_cumulative() {
    cumulative_.assign(static_cast<std::size_t>(grid_.points()), 0.0);
    for (int i = 0; i < grid_.n_steps; ++i)
      cumulative_[static_cast<std::size_t>(i + 1)] = cumulative_[static_cast<std::size_t>(i)] + segment_norm(i, grid_.dt());
  }

  TimeGrid grid_;
  std::vector<double> samples_;
  double t_on_;
  FilterKind kind_;
  Interpolation interp_;
  std::vector<double> params_;
  std::vector<double> cumulative_;
};

/// f = 1/√T on [t_on, t_on + T), zero elsewhere. T is rounded to a whole
/// number of grid cells.
inline FilterFunction boxcar_filter(double T, double t_on, const TimeGrid& grid) {
  grid.validate();
  const double dt = grid.dt();
  if (!(T > 0.0) || !std::isfinite(T)) throw GridError("boxcar_filter: width must be positive");
  if (T < dt * (1.0 - 1e-9)) throw GridError("boxcar_filter: width shorter than the grid spacing");
  const long cells = std::lround(T / dt);
  const long first = std::lround((t_on - grid.t0) / dt);
  if (first < 0 || first + cells > grid.n_steps || std::abs(grid.time(static_cast<int>(first)) - t_on) > 0.5 * dt)
    throw GridError("boxcar_filter: support exceeds the grid");
  std::vector<double> s(static_cast<std::size_t>(grid.points()), 0.0);
  for (long i = first; i < first + cells; ++i) s[static_cast<std::size_t>(i)] = 1.0;
  return FilterFunction(grid, std::move(s), grid.time(static_cast<int>(first)), FilterKind::boxcar,
                        Interpolation::piecewise_constant, {T});
}

/// Convenience: boxcar starting at t_on = 0 on a grid that just covers it.
inline FilterFunction boxcar_filter(double T, double dt = 0.01) {
  const int n = std::max(10, static_cast<int>(std::lround(T / dt)));
  return boxcar_filter(T, 0.0, TimeGrid(0.0, T, n));
}

/// Truncated Gaussian exp(−(t−μ)²/2σ²) sampled on the grid, zero before t_on
/// and linearly interpolated. The window must start at least 5σ before the
/// peak; the profile is cut off at the end of the grid.
inline FilterFunction gaussian_filter(double mu, double sigma, double t_on, const TimeGrid& grid) {
  grid.validate();
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu)) throw GridError("gaussian_filter: need finite μ and σ > 0");
  if (t_on < grid.t0 - 1e-12 || mu - 5.0 * sigma < t_on - 1e-9) throw GridError("gaussian_filter: need μ − 5σ ≥ t_on ≥ t0");
  if (mu > grid.t1) throw GridError("gaussian_filter: peak beyond the grid");
  std::vector<double> s(static_cast<std::size_t>(grid.points()));
  for (int i = 0; i < grid.points(); ++i) {
    const double t = grid.time(i);
    s[static_cast<std::size_t>(i)] = t < t_on ? 0.0 : std::exp(-0.5 * (t - mu) * (t - mu) / (sigma * sigma));
  }
  return FilterFunction(grid, std::move(s), t_on, FilterKind::gaussian, Interpolation::linear, {mu, sigma});
}

/// Gaussian centred 5σ after t_on = 0 on a window of 10σ.
inline FilterFunction gaussian_filter(double sigma, double dt = 0.05) {
  const double width = 10.0 * sigma;
  return gaussian_filter(5.0 * sigma, sigma, 0.0, TimeGrid(0.0, width, std::max(10, static_cast<int>(std::lround(width / dt)))));
}

/// Linearly interpolated profile from arbitrary samples (normalized on construction).
inline FilterFunction custom_filter(const TimeGrid& grid, std::vector<double> samples, double t_on) {
  return FilterFunction(grid, std::move(samples), t_on, FilterKind::custom, Interpolation::linear);
}

// --- CSV persistence (header "t,f") -----------------------------------------

inline void write_filter_csv(const FilterFunction& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_filter_csv: cannot open " + path);
  out << "t,f\n" << std::setprecision(17);
  for (int i = 0; i < f.grid().points(); ++i) out << f.grid().time(i) << ',' << f.samples()[static_cast<std::size_t>(i)] << '\n';
}

/// Reads a uniform (t, f) table. The onset is the first nonzero sample.
inline FilterFunction read_filter_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_filter_csv: cannot open " + path);
  std::string line;
  std::vector<double> ts, fs;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double t = 0.0, f = 0.0;
    if (!(row >> t >> f)) {
      if (ts.empty()) continue;  // header
      throw ConfigError("read_filter_csv: malformed row '" + line + "'");
    }
    ts.push_back(t);
    fs.push_back(f);
  }
  if (ts.size() < 11) throw GridError("read_filter_csv: need at least 11 samples");
  const int n = static_cast<int>(ts.size()) - 1;
  TimeGrid grid(ts.front(), ts.back(), n);
  for (int i = 0; i <= n; ++i)
    if (std::abs(ts[static_cast<std::size_t>(i)] - grid.time(i)) > 1e-6 * grid.dt()) throw GridError("read_filter_csv: grid is not uniform");
  double t_on = ts.front();
  for (int i = 0; i <= n; ++i) {
    if (fs[static_cast<std::size_t>(i)] != 0.0) {
      t_on = ts[static_cast<std::size_t>(std::max(0, i - 1))];
      break;
    }
  }
  return custom_filter(grid, std::move(fs), t_on);
}

}  // namespace kpo
