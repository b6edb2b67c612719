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

// Persistence: density matrices as JSON, result tables as CSV with a
// provenance header, and small formatting helpers.

#pragma once

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fock_core.hpp"
#include "kpo/nonclassicality.hpp"

#ifndef KPO_GIT_HASH
#define KPO_GIT_HASH "unknown"
#endif

namespace kpo::harness {

using json = nlohmann::json;

inline constexpr const char* kStateSchema = "kpo-state/1";
inline constexpr const char* kResultSchema = "kpo-results/1";

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// Density matrices

inline json state_to_json(const DensityMatrix& rho, const json& meta = json::object()) {
  json rows = json::array();
  for (int i = 0; i < rho.dim(); ++i) {
    json row = json::array();
    for (int j = 0; j < rho.dim(); ++j) row.push_back({rho.matrix()(i, j).real(), rho.matrix()(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return {{"schema", kStateSchema}, {"dim", rho.dim()}, {"rho", std::move(rows)}, {"meta", meta}};
}

inline DensityMatrix state_from_json(const json& j) {
  if (!j.contains("rho") || !j["rho"].is_array()) throw ConfigError("state JSON: missing 'rho'");
  const auto& rows = j["rho"];
  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != n) throw DimensionMismatch("state JSON: matrix is not square");
    for (int k = 0; k < n; ++k) {
      const auto& e = rows[i][k];
      if (!e.is_array() || e.size() != 2) throw ConfigError("state JSON: entries must be [re, im]");
      m(i, k) = cplx(e[0].get<double>(), e[1].get<double>());
    }
  }
  return DensityMatrix(m);
}

inline void write_state(const std::string& path, const DensityMatrix& rho, const json& meta = json::object()) {
  open_out(path) << state_to_json(rho, meta).dump(1) << '\n';
}

inline DensityMatrix read_state(const std::string& path) {
  try {
    return state_from_json(json::parse(slurp(path)));
  } catch (const json::exception& e) {
    throw ConfigError("state JSON '" + path + "': " + e.what());
  }
}

/// Metrics in a fixed key order.
inline nlohmann::ordered_json metrics_to_json(const MetricsRecord& m) {
  using ojson = nlohmann::ordered_json;
  auto num = [](double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); };
  ojson b = ojson::object();
  for (std::size_t n = 0; n < m.b_n.size(); ++n) b["B" + std::to_string(n + 1)] = num(m.b_n[n]);
  return ojson{{"s", num(m.s)},      {"klyshko", b},         {"wln", m.wln},
               {"purity", m.purity}, {"n_mean", m.n_mean}, {"populations", m.populations}};
}

/// W(x, p) as CSV rows x,p,w.
inline void write_wigner_csv(const std::string& path, const WignerField& w) {
  auto out = open_out(path);
  out << "x,p,w\n";
  for (int i = 0; i < w.grid.n_x; ++i)
    for (int j = 0; j < w.grid.n_p; ++j)
      out << format_double(w.grid.x(i)) << ',' << format_double(w.grid.p(j)) << ',' << format_double(w.values(i, j))
          << '\n';
}

// ---------------------------------------------------------------------------
// Result tables

struct Provenance {
  std::string git_hash = KPO_GIT_HASH;
  std::string config_hash;
  std::string created;
};

/// Columnar table with string cells; numeric cells are written in shortest
/// round-trip form so identical runs produce identical files.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add(std::vector<std::string> row) {
    if (row.size() != columns_.size()) throw DimensionMismatch("Table: row width differs from header");
    rows_.push_back(std::move(row));
  }

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i] == name) return static_cast<int>(i);
    throw IndexError("Table: no column '" + name + "'");
  }

  double number(std::size_t row, const std::string& name) const {
    const std::string& s = rows_.at(row)[static_cast<std::size_t>(column(name))];
    return s.empty() ? std::nan("") : std::stod(s);
  }

  void write(std::ostream& out, const Provenance* prov = nullptr) const {
    if (prov) {
      out << "# schema: " << kResultSchema << '\n';
      out << "# git: " << prov->git_hash << '\n';
      if (!prov->config_hash.empty()) out << "# config: " << prov->config_hash << '\n';
      out << "# created: " << prov->created << '\n';
    }
    for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
  }

  void write(const std::string& path, const Provenance* prov = nullptr) const {
    auto out = open_out(path);
    write(out, prov);
  }

  /// Reads a table written by `write`, skipping '#' comment lines.
  static Table read(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      header = split(line);
      break;
    }
    if (header.empty()) throw ConfigError("table '" + path + "' has no header");
    Table t(header);
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      t.add(split(line));
    }
    return t;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace kpo::harness
