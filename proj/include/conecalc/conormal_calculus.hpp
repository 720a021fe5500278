// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conormal symbol sequences f_l of a cone differential operator
//   A = t^{-mu} sum_k a_k(t) (-t d/dt)^k,   f_l(z) = sum_j a_j^{(l)} z^j,
// and the recursion g_0 = 1, g_l = -(T^{-l} f_0^{-1}) sum_{j<l} (T^{-j} f_{l-j}) g_j.

#include <memory>
#include <optional>
#include <vector>

#include "mero_core.hpp"

namespace conecalc {

struct ConormalSequence {
  int mu = 0;  // operator order
  int n = 0;   // cross-section dimension
  std::vector<MatrixPolynomial> fs;
  int taylor_depth = 0;  // f_l known for l <= taylor_depth (zero beyond fs.size())
  bool exact = false;    // coefficients are polynomial in t: f_l = 0 for every l >= fs.size()

  Eigen::Index dim() const { return fs.front().dim(); }

  bool available(int l) const { return exact || l <= taylor_depth; }

  MatrixPolynomial f(int l) const {
    if (!available(l)) fail(ErrorCode::RecursionTooShallow, "conormal symbol f_" + std::to_string(l) + " is not available");
    if (l < static_cast<int>(fs.size())) return fs[static_cast<std::size_t>(l)];
    return MatrixPolynomial::zero(dim());
  }
};

/// taylor[l][j] = a_j^{(l)}.  Trailing all-zero levels are trimmed from fs
/// but still count as known Taylor data.
inline ConormalSequence build_sequence(const std::vector<std::vector<CMatrix>>& taylor, int mu, int n, bool exact = false) {
  if (taylor.empty() || taylor.front().empty()) fail(ErrorCode::ShapeMismatch, "empty Taylor table");
  if (mu < 1) fail(ErrorCode::ShapeMismatch, "operator order must be positive");
  const auto width = taylor.front().size();
  const auto dim = taylor.front().front().rows();
  if (width > static_cast<std::size_t>(mu) + 1) fail(ErrorCode::ShapeMismatch, "a_j given for j > mu");
  for (const auto& row : taylor) {
    if (row.size() != width) fail(ErrorCode::ShapeMismatch, "Taylor table is not rectangular");
    for (const auto& a : row) {
      if (a.rows() != dim || a.cols() != dim) fail(ErrorCode::ShapeMismatch, "coefficient matrices differ in size");
    }
  }
  ConormalSequence seq;
  seq.mu = mu;
  seq.n = n;
  seq.exact = exact;
  seq.taylor_depth = static_cast<int>(taylor.size()) - 1;
  for (const auto& row : taylor) seq.fs.emplace_back(row);
  while (seq.fs.size() > 1 && seq.fs.back().is_zero()) seq.fs.pop_back();
  return seq;
}

namespace detail {

inline bool near_any(cplx z, const std::vector<cplx>& pts, double tol) {
  return std::any_of(pts.begin(), pts.end(), [&](cplx p) { return std::abs(z - p) < tol; });
}

}  // namespace detail

/// Lazily evaluated g_0..g_lmax with pole bookkeeping.
class ConormalRecursion {
 public:
  ConormalRecursion(ConormalSequence seq, int lmax) : seq_(std::move(seq)), lmax_(lmax) {
    if (lmax < 0) fail(ErrorCode::InvalidInput, "negative recursion depth");
    fs_.reserve(static_cast<std::size_t>(lmax) + 1);
    for (int l = 0; l <= lmax; ++l) fs_.push_back(seq_.f(l));  // refuses l beyond the Taylor depth
    for (const auto& pl : all_poles(seq_.fs.front())) f0_poles_.push_back(pl.value);
  }

  const ConormalSequence& sequence() const { return seq_; }
  int depth() const { return lmax_; }
  const std::vector<cplx>& f0_poles() const { return f0_poles_; }

  /// Superset of the pole locations of g_l: poles of f_0^{-1} shifted by 1..l.
  std::vector<cplx> pole_candidates(int l) const {
    std::vector<cplx> out;
    for (int k = 1; k <= l; ++k) {
      for (auto s : f0_poles_) out.push_back(s + static_cast<double>(k));
    }
    return out;
  }

  /// g_0(z), ..., g_l(z).
  std::vector<CMatrix> evaluate_upto(int l, cplx z) const {
    if (l > lmax_) fail(ErrorCode::RecursionTooShallow, "recursion depth exceeded");
    if (detail::near_any(z, pole_candidates(l), 1e-8)) fail(ErrorCode::PoleCollision, "evaluation point hits a shifted pole");
    const auto dim = seq_.dim();
    std::vector<CMatrix> g;
    g.reserve(static_cast<std::size_t>(l) + 1);
    g.push_back(CMatrix::Identity(dim, dim));
    for (int ell = 1; ell <= l; ++ell) {
      CMatrix sum = CMatrix::Zero(dim, dim);
      for (int j = 0; j < ell; ++j) {
        sum += fs_[static_cast<std::size_t>(ell - j)](z - static_cast<double>(j)) * g[static_cast<std::size_t>(j)];
      }
      Eigen::PartialPivLU<CMatrix> lu(fs_[0](z - static_cast<double>(ell)));
      g.push_back(-lu.solve(sum));
    }
    return g;
  }

  CMatrix g(int l, cplx z) const { return evaluate_upto(l, z).back(); }

  const MatrixPolynomial& f(int l) const { return fs_.at(static_cast<std::size_t>(l)); }

 private:
  ConormalSequence seq_;
  int lmax_;
  std::vector<MatrixPolynomial> fs_;
  std::vector<cplx> f0_poles_;
};

struct RecursionResult {
  std::shared_ptr<const ConormalRecursion> engine;
  std::vector<MatrixFunction> gs;
  std::vector<double> residual_report;  // max identity defect per level on built-in probe points
};

namespace detail {

inline std::vector<double> identity_defects(const ConormalRecursion& rec, const std::vector<cplx>& samples) {
  std::vector<double> defect(static_cast<std::size_t>(rec.depth()) + 1, 0.0);
  for (auto z : samples) {
    const auto g = rec.evaluate_upto(rec.depth(), z);
    for (int l = 0; l <= rec.depth(); ++l) {
      CMatrix sum = CMatrix::Zero(g[0].rows(), g[0].cols());
      for (int j = 0; j <= l; ++j) {
        sum += rec.f(l - j)(z - static_cast<double>(j)) * g[static_cast<std::size_t>(j)];
      }
      if (l == 0) sum -= rec.f(0)(z);
      defect[static_cast<std::size_t>(l)] = std::max(defect[static_cast<std::size_t>(l)], sum.norm());
    }
  }
  return defect;
}

// Deterministic probe points off the real axis (all poles of the Laplacian
// models are real, and generic complex poles are unlikely to be hit).
inline std::vector<cplx> probe_points(int count) {
  std::vector<cplx> out;
  for (int k = 0; k < count; ++k) out.emplace_back(-1.3 + 0.37 * k, 0.41 + 0.23 * std::sin(1.7 * k));
  return out;
}

}  // namespace detail

inline RecursionResult run_recursion(const ConormalSequence& seq, int lmax) {
  RecursionResult res;
  res.engine = std::make_shared<const ConormalRecursion>(seq, lmax);
  for (int l = 0; l <= lmax; ++l) {
    res.gs.push_back([engine = res.engine, l](cplx z) { return engine->g(l, z); });
  }
  std::vector<cplx> probes;
  for (auto z : detail::probe_points(8)) {
    if (!detail::near_any(z, res.engine->pole_candidates(lmax), 1e-6)) probes.push_back(z);
  }
  res.residual_report = detail::identity_defects(*res.engine, probes);
  return res;
}

/// max over samples and l of || sum_{j<=l} f_{l-j}(z-j) g_j(z) - [l=0] f_0(z) ||.
inline double verify_identity(const ConormalSequence& /*seq*/, const RecursionResult& result, const std::vector<cplx>& sample_z) {
  const auto d = detail::identity_defects(*result.engine, sample_z);
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

struct PoleWithOrder {
  cplx sigma;
  int order = 1;
};

inline constexpr double kStripTol = 1e-8;

/// Bounds of the admissible strip (n+1)/2 - gamma - mu < Re sigma < (n+1)/2 - gamma.
inline std::pair<double, double> weight_strip(int n, int mu, double gamma) {
  const double upper = 0.5 * (n + 1) - gamma;
  return {upper - mu, upper};
}

/// Poles of f_0^{-1} inside the weight strip, with their orders.
inline std::vector<PoleWithOrder> pole_set(const ConormalSequence& seq, double gamma) {
  const auto [lo, hi] = weight_strip(seq.n, seq.mu, gamma);
  const auto& f0 = seq.fs.front();
  std::vector<PoleWithOrder> out;
  for (const auto& pl : all_poles(f0)) {
    const double re = pl.value.real();
    if (std::abs(re - lo) < kStripTol || std::abs(re - hi) < kStripTol) {
      fail(ErrorCode::WeightOnPole, "a pole of f_0^{-1} lies on a weight line");
    }
    if (re > lo && re < hi) out.push_back({pl.value, local_laurent(f0, pl.value).order});
  }
  return out;
}

}  // namespace conecalc
