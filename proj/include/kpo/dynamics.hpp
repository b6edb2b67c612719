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

// Lindblad dynamics: model description, right-hand side, adaptive
// Dormand–Prince propagation, steady states and two-time correlators.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fock_core.hpp"

namespace kpo {

using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Coefficient = std::function<cplx(double)>;

inline SparseOp to_sparse(const Operator& op) { return op.sparseView(cplx(0.0), 0.0); }

/// Drive, nonlinearity and loss of the oscillator, in units of the loss rate.
struct SystemParams {
  cplx beta = 0.0;
  double kerr = 0.0;
  double gamma = 1.0;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("SystemParams: gamma must be > 0");
    if (!std::isfinite(kerr) || !std::isfinite(beta.real()) || !std::isfinite(beta.imag()))
      throw ConfigError("SystemParams: non-finite parameter");
  }
};

/// One operator with an optional scalar time dependence c(t); an empty
/// coefficient means c ≡ 1.
struct ModelTerm {
  SparseOp op;
  SparseOp op_adj;
  Coefficient coeff;

  ModelTerm(SparseOp o, Coefficient c = {}) : op(std::move(o)), op_adj(op.adjoint()), coeff(std::move(c)) {}
  ModelTerm(const Operator& o, Coefficient c = {}) : ModelTerm(to_sparse(o), std::move(c)) {}

  cplx at(double t) const { return coeff ? coeff(t) : cplx(1.0); }
  bool constant() const { return !coeff; }
};

/// Dissipator rate·D[L] with L(t) = Σ_j c_j(t) A_j.
struct CollapseChannel {
  double rate = 1.0;
  std::vector<ModelTerm> terms;

  CollapseChannel(const Operator& op, double r) : rate(r), terms{ModelTerm(op)} { check(); }
  CollapseChannel(double r, std::vector<ModelTerm> t) : rate(r), terms(std::move(t)) { check(); }

 private:
  void check() const {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("CollapseChannel: rate must be ≥ 0");
  }
};

class LindbladModel {
 public:
  LindbladModel(int dim, std::vector<int> factor_dims = {}) : dim_(dim), factors_(std::move(factor_dims)) {
    if (dim_ < 1) throw ConfigError("LindbladModel: dimension must be positive");
    if (factors_.empty()) factors_ = {dim_};
    const int prod = std::accumulate(factors_.begin(), factors_.end(), 1, std::multiplies<>());
    if (prod != dim_) throw DimensionMismatch("LindbladModel: factor dimensions do not multiply to the total");
  }

  LindbladModel(const Operator& hamiltonian, std::vector<CollapseChannel> channels)
      : LindbladModel(static_cast<int>(hamiltonian.rows())) {
    add_hamiltonian(hamiltonian);
    for (auto& ch : channels) add_channel(std::move(ch));
  }

  LindbladModel& add_hamiltonian(ModelTerm term) {
    check_dims(term.op);
    hamiltonian_.push_back(std::move(term));
    return *this;
  }
  LindbladModel& add_hamiltonian(const Operator& op, Coefficient c = {}) { return add_hamiltonian(ModelTerm(op, std::move(c))); }

  LindbladModel& add_channel(CollapseChannel ch) {
    for (const auto& t : ch.terms) check_dims(t.op);
    channels_.push_back(std::move(ch));
    return *this;
  }

  /// Times at which some coefficient is discontinuous; integration restarts there.
  LindbladModel& set_breakpoints(std::vector<double> b) {
    std::sort(b.begin(), b.end());
    breakpoints_ = std::move(b);
    return *this;
  }

  /// Optional symmetry-sector label per basis state. States without
  /// coherences between sectors are propagated block by block.
  LindbladModel& set_sectors(std::vector<int> labels) {
    if (!labels.empty() && static_cast<int>(labels.size()) != dim_) throw DimensionMismatch("LindbladModel: sector labels");
    sectors_ = std::move(labels);
    return *this;
  }

  int dim() const { return dim_; }
  const std::vector<int>& factor_dims() const { return factors_; }
  const std::vector<int>& sectors() const { return sectors_; }
  const std::vector<ModelTerm>& hamiltonian() const { return hamiltonian_; }
  const std::vector<CollapseChannel>& channels() const { return channels_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  bool time_dependent() const {
    for (const auto& t : hamiltonian_)
      if (!t.constant()) return true;
    for (const auto& ch : channels_)
      for (const auto& t : ch.terms)
        if (!t.constant()) return true;
    return false;
  }

 private:
  void check_dims(const SparseOp& op) const {
    if (op.rows() != dim_ || op.cols() != dim_) throw DimensionMismatch("LindbladModel: operator dimension mismatch");
  }

  int dim_;
  std::vector<int> factors_;
  std::vector<ModelTerm> hamiltonian_;
  std::vector<CollapseChannel> channels_;
  std::vector<double> breakpoints_;
  std::vector<int> sectors_;
};

/// Single-mode oscillator: Hamiltonian of the Kerr parametric oscillator and
/// one loss channel √γ c.
inline LindbladModel kpo_model(const SystemParams& params, HilbertDim dim) {
  params.validate();
  LindbladModel m(kpo_hamiltonian(params.beta, params.kerr, dim), {CollapseChannel(annihilation(dim), params.gamma)});
  std::vector<int> parity(static_cast<std::size_t>(dim.value()));
  for (int k = 0; k < dim.value(); ++k) parity[static_cast<std::size_t>(k)] = k % 2;
  m.set_sectors(std::move(parity));
  return m;
}

// ---------------------------------------------------------------------------
// Right-hand side

namespace detail {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RhsWorkspace {
  Eigen::MatrixXcd x, y, w;
};

inline void accumulate_product(Eigen::MatrixXcd& dst, const SparseOp& op, const Eigen::MatrixXcd& src, cplx c,
                               Eigen::MatrixXcd& scratch, bool first) {
  scratch.noalias() = op * src;
  if (first) {
    dst = c * scratch;
  } else {
    dst += c * scratch;
  }
}

inline void accumulate_product_right(Eigen::MatrixXcd& dst, const Eigen::MatrixXcd& src, const SparseOp& op, cplx c,
                                     Eigen::MatrixXcd& scratch, bool first) {
  scratch.noalias() = src * op;
  if (first) {
    dst = c * scratch;
  } else {
    dst += c * scratch;
  }
}

// Reference implementation for arbitrary (not necessarily Hermitian) ρ.
inline void lindblad_rhs_general(const LindbladModel& model, const Eigen::MatrixXcd& rho, double t,
                                 Eigen::MatrixXcd& out, RhsWorkspace& ws) {
  const Eigen::Index n = rho.rows();
  out.setZero(n, n);
  for (const auto& term : model.hamiltonian()) {
    const cplx c = term.at(t);
    accumulate_product(out, term.op, rho, cplx(0.0, -1.0) * c, ws.w, false);
    accumulate_product_right(out, rho, term.op, cplx(0.0, 1.0) * c, ws.w, false);
  }
  for (const auto& ch : model.channels()) {
    if (ch.rate == 0.0) continue;
    std::vector<cplx> coeffs;
    for (const auto& term : ch.terms) coeffs.push_back(term.at(t));
    for (std::size_t j = 0; j < ch.terms.size(); ++j) {
      accumulate_product(ws.x, ch.terms[j].op, rho, coeffs[j], ws.w, j == 0);                     // Lρ
      accumulate_product_right(ws.y, rho, ch.terms[j].op_adj, std::conj(coeffs[j]), ws.w, j == 0);  // ρL†
    }
    for (std::size_t j = 0; j < ch.terms.size(); ++j) {
      accumulate_product_right(out, ws.x, ch.terms[j].op_adj, ch.rate * std::conj(coeffs[j]), ws.w, false);
      accumulate_product(out, ch.terms[j].op_adj, ws.x, -0.5 * ch.rate * std::conj(coeffs[j]), ws.w, false);
      accumulate_product_right(out, ws.y, ch.terms[j].op, -0.5 * ch.rate * coeffs[j], ws.w, false);
    }
  }
}

// --- fused kernel for Hermitian states -------------------------------------
//
// Every operator is split into its diagonals, op(i, i+o) = w_i. A diagonal
// has at most one entry per row and column, so A ρ B† reduces to shifted
// row segments of ρ scaled by weight vectors. ρ is stored as a list of
// row-major blocks, one per symmetry sector; entries between sectors are
// identically zero and never stored.

struct Diagonal {
  int offset;
  Eigen::VectorXcd w;
};

inline std::vector<Diagonal> split_diagonals(const SparseOp& op) {
  const int n = static_cast<int>(op.rows());
  std::map<int, Eigen::VectorXcd> by_offset;
  for (int r = 0; r < op.outerSize(); ++r) {
    for (SparseOp::InnerIterator it(op, r); it; ++it) {
      if (it.value() == cplx(0.0)) continue;
      auto& v = by_offset[static_cast<int>(it.col()) - r];
      if (v.size() == 0) v = Eigen::VectorXcd::Zero(n);
      v[r] = it.value();
    }
  }
  std::vector<Diagonal> out;
  for (auto& [o, w] : by_offset) out.push_back({o, std::move(w)});
  return out;
}

struct SectorLayout {
  std::vector<int> block_of;
  std::vector<int> local_of;
  std::vector<std::vector<int>> members;

  static SectorLayout from_labels(const std::vector<int>& labels) {
    SectorLayout s;
    std::map<int, int> index;
    for (int l : labels) index.emplace(l, 0);
    int b = 0;
    for (auto& [l, id] : index) id = b++;
    s.members.resize(index.size());
    s.block_of.resize(labels.size());
    s.local_of.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int blk = index[labels[i]];
      s.block_of[i] = blk;
      s.local_of[i] = static_cast<int>(s.members[static_cast<std::size_t>(blk)].size());
      s.members[static_cast<std::size_t>(blk)].push_back(static_cast<int>(i));
    }
    return s;
  }
  static SectorLayout trivial(int n) { return from_labels(std::vector<int>(static_cast<std::size_t>(n), 0)); }

  int dim() const { return static_cast<int>(block_of.size()); }
  std::size_t blocks() const { return members.size(); }

  std::vector<RowMat> scatter(const Eigen::MatrixXcd& rho) const {
    std::vector<RowMat> out;
    for (const auto& m : members) {
      RowMat b(m.size(), m.size());
      for (std::size_t r = 0; r < m.size(); ++r)
        for (std::size_t c = 0; c < m.size(); ++c) b(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rho(m[r], m[c]);
      out.push_back(std::move(b));
    }
    return out;
  }

  Eigen::MatrixXcd gather(const std::vector<RowMat>& blocks_in) const {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim(), dim());
    for (std::size_t b = 0; b < members.size(); ++b) {
      const auto& m = members[b];
      for (std::size_t r = 0; r < m.size(); ++r)
        for (std::size_t c = 0; c < m.size(); ++c) rho(m[r], m[c]) = blocks_in[b](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    return rho;
  }

  /// Largest |ρ_ij| between different sectors.
  double leakage(const Eigen::MatrixXcd& rho) const {
    double worst = 0.0;
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j)
        if (block_of[static_cast<std::size_t>(i)] != block_of[static_cast<std::size_t>(j)]) worst = std::max(worst, std::abs(rho(i, j)));
    return worst;
  }

  cplx element(const std::vector<RowMat>& blocks_in, int i, int j) const {
    const auto bi = block_of[static_cast<std::size_t>(i)];
    if (bi != block_of[static_cast<std::size_t>(j)]) return 0.0;
    return blocks_in[static_cast<std::size_t>(bi)](local_of[static_cast<std::size_t>(i)], local_of[static_cast<std::size_t>(j)]);
  }
};

class HermitianKernel {
 public:
  HermitianKernel(const LindbladModel& model, const SectorLayout& layout) : layout_(layout), dim_(model.dim()) {
    for (const auto& term : model.hamiltonian()) {
      const ModelTerm* tp = &term;
      for (auto& d : split_diagonals(term.op)) {
        add_left(d, [tp](double t) { return cplx(0.0, -1.0) * tp->at(t); });
      }
    }
    for (const auto& ch : model.channels()) {
      if (ch.rate == 0.0) continue;
      const double rate = ch.rate;
      for (const auto& tp : ch.terms) {
        for (const auto& tq : ch.terms) {
          const ModelTerm* p = &tp;
          const ModelTerm* q = &tq;
          const SparseOp prod = SparseOp(tp.op_adj * tq.op);
          for (auto& d : split_diagonals(prod)) {
            add_left(d, [p, q, rate](double t) { return -0.5 * rate * std::conj(p->at(t)) * q->at(t); });
          }
          const auto dp = split_diagonals(tp.op);
          const auto dq = split_diagonals(tq.op);
          for (const auto& a : dp) {
            for (const auto& b : dq) {
              Sandwich s{a.offset, a.w, {}, [p, q, rate](double t) { return 0.5 * rate * p->at(t) * std::conj(q->at(t)); }};
              s.runs = column_runs(b);
              sandwiches_.push_back(std::move(s));
            }
          }
        }
      }
    }
  }

  /// Whether every term maps block-diagonal states to block-diagonal states.
  static bool compatible(const LindbladModel& model, const SectorLayout& layout) {
    auto block_map = [&](const Diagonal& d, std::map<int, int>& sigma) {
      for (int i = 0; i < static_cast<int>(d.w.size()); ++i) {
        if (d.w[i] == cplx(0.0)) continue;
        const int src = layout.block_of[static_cast<std::size_t>(i + d.offset)];
        const int dst = layout.block_of[static_cast<std::size_t>(i)];
        auto [it, fresh] = sigma.emplace(src, dst);
        if (!fresh && it->second != dst) return false;
      }
      return true;
    };
    for (const auto& term : model.hamiltonian()) {
      for (const auto& d : split_diagonals(term.op)) {
        std::map<int, int> sigma;
        if (!block_map(d, sigma)) return false;
        for (auto [s, t] : sigma)
          if (s != t) return false;
      }
    }
    for (const auto& ch : model.channels()) {
      std::map<int, int> sigma;
      for (const auto& term : ch.terms)
        for (const auto& d : split_diagonals(term.op))
          if (!block_map(d, sigma)) return false;
      std::map<int, int> inverse;
      for (auto [s, t] : sigma)
        if (!inverse.emplace(t, s).second) return false;
    }
    return true;
  }

  void operator()(const std::vector<RowMat>& rho, double t, std::vector<RowMat>& out) {
    out.resize(rho.size());
    for (std::size_t b = 0; b < rho.size(); ++b) out[b].setZero(rho[b].rows(), rho[b].cols());
    for (auto& g : left_) {
      g.sum.setZero(dim_);
      for (const auto& [w, coeff] : g.parts) g.sum += coeff(t) * w;
      apply_left(g, rho, out);
    }
    for (const auto& s : sandwiches_) {
      const cplx c = s.coeff(t);
      if (c == cplx(0.0)) continue;
      apply_sandwich(s, c, rho, out);
    }
    for (auto& blk : out) add_adjoint_in_place(blk);
  }

 private:
  struct LeftGroup {
    int offset;
    std::vector<std::pair<Eigen::VectorXcd, std::function<cplx(double)>>> parts;
    Eigen::VectorXcd sum;
  };
  struct Run {
    int j0, src0, len, src_block;
  };
  struct ColumnRuns {
    std::vector<std::vector<Run>> per_block;
    std::vector<Eigen::VectorXcd> weights;  // conj(w_j) in local column order
  };
  struct Sandwich {
    int row_offset;
    Eigen::VectorXcd row_w;
    ColumnRuns runs;
    std::function<cplx(double)> coeff;
  };

  void add_left(Diagonal& d, std::function<cplx(double)> coeff) {
    for (auto& g : left_) {
      if (g.offset == d.offset) {
        g.parts.emplace_back(std::move(d.w), std::move(coeff));
        return;
      }
    }
    LeftGroup g{d.offset, {}, {}};
    g.parts.emplace_back(std::move(d.w), std::move(coeff));
    left_.push_back(std::move(g));
  }

  ColumnRuns column_runs(const Diagonal& d) const {
    ColumnRuns cr;
    for (const auto& m : layout_.members) {
      std::vector<Run> runs;
      Eigen::VectorXcd w = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m.size()));
      for (int lj = 0; lj < static_cast<int>(m.size()); ++lj) {
        const int j = m[static_cast<std::size_t>(lj)];
        if (d.w[j] == cplx(0.0)) continue;
        const int s = j + d.offset;
        const int sb = layout_.block_of[static_cast<std::size_t>(s)];
        const int ls = layout_.local_of[static_cast<std::size_t>(s)];
        w[lj] = std::conj(d.w[j]);
        if (!runs.empty()) {
          Run& r = runs.back();
          if (r.src_block == sb && r.j0 + r.len == lj && r.src0 + r.len == ls) {
            ++r.len;
            continue;
          }
        }
        runs.push_back({lj, ls, 1, sb});
      }
      cr.per_block.push_back(std::move(runs));
      cr.weights.push_back(std::move(w));
    }
    return cr;
  }

  void apply_left(const LeftGroup& g, const std::vector<RowMat>& rho, std::vector<RowMat>& out) const {
    for (std::size_t b = 0; b < rho.size(); ++b) {
      const auto& m = layout_.members[b];
      for (std::size_t li = 0; li < m.size(); ++li) {
        const int i = m[li];
        const cplx w = g.sum[i];
        if (w == cplx(0.0)) continue;
        const int lr = layout_.local_of[static_cast<std::size_t>(i + g.offset)];
        out[b].row(static_cast<Eigen::Index>(li)) += w * rho[b].row(lr);
      }
    }
  }

  void apply_sandwich(const Sandwich& s, cplx c, const std::vector<RowMat>& rho, std::vector<RowMat>& out) const {
    for (std::size_t b = 0; b < rho.size(); ++b) {
      const auto& m = layout_.members[b];
      const auto& runs = s.runs.per_block[b];
      const auto& cw = s.runs.weights[b];
      for (std::size_t li = 0; li < m.size(); ++li) {
        const int i = m[li];
        if (s.row_w[i] == cplx(0.0)) continue;
        const int r = i + s.row_offset;
        const int sb = layout_.block_of[static_cast<std::size_t>(r)];
        const int lr = layout_.local_of[static_cast<std::size_t>(r)];
        const cplx scale = c * s.row_w[i];
        auto orow = out[b].row(static_cast<Eigen::Index>(li));
        const auto srow = rho[static_cast<std::size_t>(sb)].row(lr);
        for (const Run& run : runs) {
          if (run.src_block != sb) continue;
          orow.segment(run.j0, run.len) += scale * srow.segment(run.src0, run.len).cwiseProduct(cw.segment(run.j0, run.len).transpose());
        }
      }
    }
  }

  // P ← P + P†, tiled for cache reuse. The result is Hermitian bit for bit.
  static void add_adjoint_in_place(RowMat& p) {
    const Eigen::Index n = p.rows();
    constexpr Eigen::Index tile = 64;
    for (Eigen::Index ib = 0; ib < n; ib += tile) {
      const Eigen::Index ie = std::min(n, ib + tile);
      for (Eigen::Index jb = ib; jb < n; jb += tile) {
        const Eigen::Index je = std::min(n, jb + tile);
        for (Eigen::Index i = ib; i < ie; ++i) {
          for (Eigen::Index j = std::max(jb, i + 1); j < je; ++j) {
            const cplx a = p(i, j);
            const cplx b = p(j, i);
            p(i, j) = a + std::conj(b);
            p(j, i) = b + std::conj(a);
          }
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) p(i, i) = 2.0 * p(i, i).real();
  }

  const SectorLayout& layout_;
  int dim_;
  std::vector<LeftGroup> left_;
  std::vector<Sandwich> sandwiches_;
};

}  // namespace detail

/// −i[H(t),ρ] + Σ_k r_k (L_k ρ L_k† − ½{L_k†L_k, ρ}) for any square ρ.
inline Eigen::MatrixXcd lindblad_rhs(const LindbladModel& model, const Eigen::MatrixXcd& rho, double t) {
  if (rho.rows() != model.dim() || rho.cols() != model.dim()) throw DimensionMismatch("lindblad_rhs: dimension mismatch");
  Eigen::MatrixXcd out;
  detail::RhsWorkspace ws;
  detail::lindblad_rhs_general(model, rho, t, out, ws);
  return out;
}

inline Eigen::MatrixXcd lindblad_rhs(const LindbladModel& model, const DensityMatrix& rho, double t) {
  return lindblad_rhs(model, rho.matrix(), t);
}

// ---------------------------------------------------------------------------
// Propagation

struct PropagatorOptions {
  double rel_tol = 1e-8;
  /// Absolute floor of the per-entry error scale; 0 selects 1e−4·rel_tol.
  double abs_tol = 0.0;
  long max_steps = 2'000'000;
};

namespace detail {

// Adaptive Dormand–Prince 5(4) with FSAL on a list of matrix blocks. Steps
// never straddle the given breakpoints; the step size carries over between
// calls.
template <class Mat, class Rhs>
class Dopri5 {
 public:
  using State = std::vector<Mat>;

  Dopri5(Rhs rhs, PropagatorOptions opts, std::vector<double> breakpoints)
      : rhs_(std::move(rhs)), opts_(opts), breaks_(std::move(breakpoints)) {
    if (!(opts_.rel_tol >= 1e-13) || !(opts_.rel_tol <= 1e-2)) throw ConfigError("Propagator: rel_tol out of range");
    if (opts_.abs_tol <= 0.0) opts_.abs_tol = 1e-4 * opts_.rel_tol;
  }

  long steps() const { return steps_; }
  long evaluations() const { return evals_; }

  /// Integrates from t0 towards t1. `stop`, when given, is consulted after
  /// every accepted step; the reached time is returned.
  double advance(State& y, double t0, double t1, const std::function<bool()>& stop = {}) {
    if (t1 < t0) throw ConfigError("Propagator: time must increase");
    double t = t0;
    for (double b : breaks_) {
      if (b > t && b < t1) {
        const double r = segment(y, t, b, stop);
        if (r < b) return r;
        t = b;
      }
    }
    return segment(y, t, t1, stop);
  }

 private:
  void eval(const State& y, double t, State& out) {
    ++evals_;
    rhs_(y, t, out);
  }

  static double max_abs(const State& s) {
    double m = 0.0;
    for (const auto& b : s)
      if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
  }

  double segment(State& y, double t0, double t1, const std::function<bool()>& stop) {
    const double span = t1 - t0;
    if (span <= 0.0) return t1;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    const std::size_t nb = y.size();
    tmp_.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) tmp_[b].resize(y[b].rows(), y[b].cols());

    // Coefficients may jump at segment ends; stage times stay strictly inside
    // so every evaluation sees the same side of a discontinuity.
    const double pad = 1e-9 * span;
    auto inside = [&](double s) { return std::clamp(s, t0 + pad, t1 - pad); };
    double t = t0;
    eval(y, inside(t), k1_);
    double h = h_ > 0.0 ? std::min(h_, span) : initial_step(y, span);
    const double h_min = 1e-14 * std::max(1.0, std::abs(t1));
    while (t < t1) {
      if (++steps_ > opts_.max_steps) throw StiffnessError("Propagator: step budget exhausted");
      bool last = false;
      if (t + h >= t1 || t1 - (t + h) < 1e-12 * span) {
        h = t1 - t;
        last = true;
      }
      for (std::size_t b = 0; b < nb; ++b) tmp_[b] = y[b] + (h * a21) * k1_[b];
      eval(tmp_, inside(t + c2 * h), k2_);
      for (std::size_t b = 0; b < nb; ++b) tmp_[b] = y[b] + h * (a31 * k1_[b] + a32 * k2_[b]);
      eval(tmp_, inside(t + c3 * h), k3_);
      for (std::size_t b = 0; b < nb; ++b) tmp_[b] = y[b] + h * (a41 * k1_[b] + a42 * k2_[b] + a43 * k3_[b]);
      eval(tmp_, inside(t + c4 * h), k4_);
      for (std::size_t b = 0; b < nb; ++b)
        tmp_[b] = y[b] + h * (a51 * k1_[b] + a52 * k2_[b] + a53 * k3_[b] + a54 * k4_[b]);
      eval(tmp_, inside(t + c5 * h), k5_);
      for (std::size_t b = 0; b < nb; ++b)
        tmp_[b] = y[b] + h * (a61 * k1_[b] + a62 * k2_[b] + a63 * k3_[b] + a64 * k4_[b] + a65 * k5_[b]);
      eval(tmp_, inside(t + h), k6_);
      for (std::size_t b = 0; b < nb; ++b)
        tmp_[b] = y[b] + h * (b1 * k1_[b] + b3 * k3_[b] + b4 * k4_[b] + b5 * k5_[b] + b6 * k6_[b]);
      eval(tmp_, inside(t + h), k7_);

      // mixed absolute/relative scale per entry, max norm
      double err = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (y[b].size() == 0) continue;
        err = std::max(err, ((h * (e1 * k1_[b] + e3 * k3_[b] + e4 * k4_[b] + e5 * k5_[b] + e6 * k6_[b] + e7 * k7_[b]))
                                 .array()
                                 .abs() /
                             (opts_.abs_tol + opts_.rel_tol * y[b].array().abs().max(tmp_[b].array().abs())))
                                .maxCoeff());
      }
      if (!std::isfinite(err)) throw StiffnessError("Propagator: non-finite state at t = " + std::to_string(t));
      if (err <= 1.0) {
        t = last ? t1 : t + h;
        y.swap(tmp_);
        k1_.swap(k7_);
        const double fac = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
        if (!last) h_ = h * fac;
        h *= fac;
        if (stop && t < t1 && stop()) {
          sync_scratch(y);
          return t;
        }
      } else {
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        if (h < h_min) throw StiffnessError("Propagator: step size underflow at t = " + std::to_string(t));
      }
    }
    sync_scratch(y);
    return t1;
  }

  // keep the shapes of tmp_ in sync with y after a swap
  void sync_scratch(const State& y) {
    for (std::size_t b = 0; b < y.size(); ++b) tmp_[b].resize(y[b].rows(), y[b].cols());
  }

  double initial_step(const State& y, double span) const {
    const double d0 = std::max(max_abs(y), 1e-12);
    const double d1 = std::max(max_abs(k1_), 1e-12);
    return std::min({0.01 * d0 / d1, span, 0.1});
  }

  Rhs rhs_;
  PropagatorOptions opts_;
  std::vector<double> breaks_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_;
  double h_ = 0.0;
  long steps_ = 0;
  long evals_ = 0;
};

}  // namespace detail

/// Propagates a Hermitian state under a Lindblad model. The state is held in
/// symmetry-sector blocks when the model declares sector labels and the
/// initial state respects them; otherwise as one block. Hermiticity is exact
/// by construction of the kernel, so no explicit symmetrization is needed.
class HermitianPropagator {
 public:
  HermitianPropagator(const LindbladModel& model, const Eigen::MatrixXcd& rho0, PropagatorOptions opts = {})
      : model_(model), layout_(choose_layout(model, rho0)), kernel_(model_, layout_),
        stepper_(KernelRef{&kernel_}, opts, model.breakpoints()) {
    if (rho0.rows() != model.dim() || rho0.cols() != model.dim()) throw DimensionMismatch("HermitianPropagator: dimension mismatch");
    state_ = layout_.scatter(rho0);
  }

  HermitianPropagator(const HermitianPropagator&) = delete;
  HermitianPropagator& operator=(const HermitianPropagator&) = delete;

  double time() const { return t_; }
  void set_time(double t) { t_ = t; }

  void advance_to(double t1) {
    stepper_.advance(state_, t_, t1);
    t_ = t1;
  }

  /// Advances towards t1 but halts after the first step at which `stop`
  /// (which may inspect this propagator) returns true. Returns the time reached.
  double advance_until(double t1, const std::function<bool()>& stop) {
    t_ = stepper_.advance(state_, t_, t1, stop);
    return t_;
  }

  std::size_t sector_count() const { return layout_.blocks(); }
  long steps() const { return stepper_.steps(); }
  long evaluations() const { return stepper_.evaluations(); }

  cplx element(int i, int j) const { return layout_.element(state_, i, j); }
  Eigen::MatrixXcd matrix() const { return layout_.gather(state_); }

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(model_.dim());
    for (int i = 0; i < model_.dim(); ++i) d[i] = element(i, i).real();
    return d;
  }

 private:
  struct KernelRef {
    detail::HermitianKernel* k;
    void operator()(const std::vector<detail::RowMat>& y, double t, std::vector<detail::RowMat>& out) const { (*k)(y, t, out); }
  };

  static detail::SectorLayout choose_layout(const LindbladModel& model, const Eigen::MatrixXcd& rho0) {
    if (!model.sectors().empty()) {
      auto layout = detail::SectorLayout::from_labels(model.sectors());
      const double scale = std::max(1.0, rho0.cwiseAbs().maxCoeff());
      if (layout.blocks() > 1 && layout.leakage(rho0) <= 1e-14 * scale &&
          detail::HermitianKernel::compatible(model, layout))
        return layout;
    }
    return detail::SectorLayout::trivial(model.dim());
  }

  const LindbladModel& model_;
  detail::SectorLayout layout_;
  detail::HermitianKernel kernel_;
  detail::Dopri5<detail::RowMat, KernelRef> stepper_;
  std::vector<detail::RowMat> state_;
  double t_ = 0.0;
};

/// Populations of each level of every tensor factor, from the joint diagonal.
inline std::vector<std::vector<double>> factor_populations(const Eigen::VectorXd& diag, const std::vector<int>& dims) {
  std::vector<std::vector<double>> pops;
  for (int d : dims) pops.emplace_back(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index idx = 0; idx < diag.size(); ++idx) {
    Eigen::Index rem = idx;
    for (int f = static_cast<int>(dims.size()) - 1; f >= 0; --f) {
      const auto d = static_cast<Eigen::Index>(dims[static_cast<std::size_t>(f)]);
      pops[static_cast<std::size_t>(f)][static_cast<std::size_t>(rem % d)] += diag[idx];
      rem /= d;
    }
  }
  return pops;
}

/// Largest population among the two highest Fock levels of any factor.
inline double top_two_population(const Eigen::VectorXd& diag, const std::vector<int>& dims) {
  double worst = 0.0;
  for (const auto& p : factor_populations(diag, dims)) {
    const auto n = p.size();
    worst = std::max(worst, std::abs(p[n - 1]));
    if (n >= 2) worst = std::max(worst, std::abs(p[n - 2]));
  }
  return worst;
}

inline constexpr double kEvolveTruncationTol = 1e-6;

/// Snapshots of ρ(t) at every time in `t_grid`; the first entry is the start
/// time and returns rho0.
inline std::vector<DensityMatrix> evolve(const LindbladModel& model, const DensityMatrix& rho0,
                                         const std::vector<double>& t_grid, double rel_tol = 1e-8) {
  if (rho0.dim() != model.dim()) throw DimensionMismatch("evolve: dimension mismatch");
  if (t_grid.empty()) throw ConfigError("evolve: empty time grid");
  if (!(rel_tol >= 1e-12 && rel_tol <= 1e-4)) throw ConfigError("evolve: rel_tol must lie in [1e-12, 1e-4]");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw ConfigError("evolve: time grid must be increasing");

  HermitianPropagator prop(model, rho0.matrix(), {rel_tol, 0.0});
  prop.set_time(t_grid.front());
  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  out.push_back(rho0);
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    prop.advance_to(t_grid[i]);
    const double top = top_two_population(prop.diagonal(), model.factor_dims());
    if (top > kEvolveTruncationTol) {
      throw TruncationError("evolve: top Fock populations reached " + std::to_string(top));
    }
    out.push_back(DensityMatrix::from_hermitian_part(prop.matrix()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steady state

/// Column-major vectorized Liouvillian: vec(L ρ) = 𝓛 vec(ρ).
inline Eigen::SparseMatrix<cplx> liouvillian(const LindbladModel& model) {
  if (model.time_dependent()) throw ConfigError("liouvillian: model must be time independent");
  using SpC = Eigen::SparseMatrix<cplx>;
  const int n = model.dim();
  SpC eye(n, n);
  eye.setIdentity();
  SpC h(n, n);
  for (const auto& t : model.hamiltonian()) h += SpC(t.op);
  SpC lv = cplx(0.0, -1.0) * SpC(Eigen::kroneckerProduct(eye, h)) +
           cplx(0.0, 1.0) * SpC(Eigen::kroneckerProduct(SpC(h.transpose()), eye));
  for (const auto& ch : model.channels()) {
    SpC l(n, n);
    for (const auto& t : ch.terms) l += SpC(t.op);
    const SpC ldl = SpC(l.adjoint()) * l;
    lv += ch.rate * (SpC(Eigen::kroneckerProduct(SpC(l.conjugate()), l)) - 0.5 * SpC(Eigen::kroneckerProduct(eye, ldl)) -
                     0.5 * SpC(Eigen::kroneckerProduct(SpC(ldl.transpose()), eye)));
  }
  lv.makeCompressed();
  return lv;
}

inline constexpr double kSteadyResidualTol = 1e-10;

/// Null vector of the Liouvillian with unit trace. The (0,0) balance equation
/// is redundant with trace preservation and is replaced by tr ρ = 1.
inline DensityMatrix steady_state(const LindbladModel& model) {
  const int n = model.dim();
  const Eigen::SparseMatrix<cplx> lv = liouvillian(model);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(lv.nonZeros()) + static_cast<std::size_t>(n));
  for (int col = 0; col < lv.outerSize(); ++col)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(lv, col); it; ++it)
      if (it.row() != 0) trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < n; ++k) trip.emplace_back(0, k + k * n, cplx(1.0));
  Eigen::SparseMatrix<cplx> a(n * n, n * n);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw DegenerateSteadyState("steady_state: Liouvillian null space is not one-dimensional");
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n * n);
  rhs(0) = 1.0;
  Eigen::VectorXcd x = lu.solve(rhs);
  if (!x.allFinite()) throw DegenerateSteadyState("steady_state: singular system");
  // one step of iterative refinement
  const Eigen::VectorXcd r = rhs - a * x;
  x += lu.solve(r);

  Eigen::MatrixXcd rho = Eigen::Map<Eigen::MatrixXcd>(x.data(), n, n);
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace();
  const Eigen::VectorXcd res = lv * Eigen::Map<const Eigen::VectorXcd>(rho.data(), n * n);
  const double resid = res.cwiseAbs().maxCoeff();
  if (!(resid <= kSteadyResidualTol)) {
    throw DegenerateSteadyState("steady_state: residual " + std::to_string(resid) + " (null space not unique?)");
  }
  return DensityMatrix::from_hermitian_part(rho);
}

/// Fock truncation rule for the cavity: start at `start_dim`, double until the
/// two highest populations of the steady state are below `tail_tol`, then
/// shrink to the smallest size that still satisfies the rule.
struct TruncationPolicy {
  int start_dim = 30;
  double tail_tol = 1e-8;
  int max_dim = 160;
  bool shrink = true;
};

struct CavitySteadyState {
  DensityMatrix rho;
  int dim;
};

inline CavitySteadyState cavity_steady_state(const SystemParams& params, const TruncationPolicy& policy = {}) {
  params.validate();
  auto top_two = [](const DensityMatrix& r) {
    const int n = r.dim();
    return std::max(std::abs(r(n - 1, n - 1).real()), std::abs(r(n - 2, n - 2).real()));
  };
  int n = policy.start_dim;
  for (;;) {
    if (n > policy.max_dim) throw TruncationError("cavity_steady_state: truncation exceeds max_dim");
    DensityMatrix rho = steady_state(kpo_model(params, HilbertDim(n)));
    if (top_two(rho) < policy.tail_tol) {
      if (!policy.shrink) return {std::move(rho), n};
      int last = 0;
      for (int k = 0; k < n; ++k)
        if (rho(k, k).real() >= policy.tail_tol) last = k;
      for (int m = std::max(last + 3, 4); m < n; m += 2) {
        DensityMatrix r = steady_state(kpo_model(params, HilbertDim(m)));
        if (top_two(r) < policy.tail_tol) return {std::move(r), m};
      }
      return {std::move(rho), n};
    }
    n *= 2;
  }
}

// ---------------------------------------------------------------------------
// Two-time correlators (quantum regression)

namespace detail {

inline std::vector<cplx> regress(const LindbladModel& model, Eigen::MatrixXcd x, const Operator& trace_with,
                                 const std::vector<double>& taus, double rel_tol) {
  if (model.time_dependent()) throw ConfigError("two_time_correlator: model must be time independent");
  std::vector<cplx> out;
  out.reserve(taus.size());
  RhsWorkspace ws;
  auto rhs = [&model, &ws](const std::vector<Eigen::MatrixXcd>& y, double t, std::vector<Eigen::MatrixXcd>& dy) {
    dy.resize(1);
    lindblad_rhs_general(model, y[0], t, dy[0], ws);
  };
  Dopri5<Eigen::MatrixXcd, decltype(rhs)> stepper(rhs, {rel_tol, 0.0}, {});
  std::vector<Eigen::MatrixXcd> state{std::move(x)};
  double t = 0.0;
  for (double tau : taus) {
    if (tau < t) throw ConfigError("two_time_correlator: tau grid must be non-decreasing and ≥ 0");
    stepper.advance(state, t, tau);
    t = tau;
    out.push_back(expectation(state[0], trace_with));
  }
  return out;
}

}  // namespace detail

/// ⟨left(τ) right(0)⟩ in the steady state: tr[left · e^{𝓛τ}(right ρ_ss)].
inline std::vector<cplx> two_time_correlator(const LindbladModel& model, const DensityMatrix& rho_ss,
                                             const Operator& left, const Operator& right,
                                             const std::vector<double>& taus, double rel_tol = 1e-9) {
  if (rho_ss.dim() != model.dim() || left.rows() != model.dim() || right.rows() != model.dim())
    throw DimensionMismatch("two_time_correlator: dimension mismatch");
  return detail::regress(model, right * rho_ss.matrix(), left, taus, rel_tol);
}

/// ⟨left(0) right(τ)⟩ in the steady state: tr[right · e^{𝓛τ}(ρ_ss left)].
inline std::vector<cplx> two_time_correlator_reversed(const LindbladModel& model, const DensityMatrix& rho_ss,
                                                      const Operator& left, const Operator& right,
                                                      const std::vector<double>& taus, double rel_tol = 1e-9) {
  if (rho_ss.dim() != model.dim() || left.rows() != model.dim() || right.rows() != model.dim())
    throw DimensionMismatch("two_time_correlator_reversed: dimension mismatch");
  return detail::regress(model, rho_ss.matrix() * left, right, taus, rel_tol);
}

}  // namespace kpo
