// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite sums  sum c(x) t^{-p} log^k t  and the linear algebra on spaces of
// them.  In the variable s = log t such a sum is an exponential polynomial
// sum c e^{-p s} s^k, which is how derivatives in -t d/dt are taken.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "common.hpp"

namespace conecalc {

/// coeff(x) t^{-exponent} log^{logpow} t, coeff given in the cross-section basis.
struct AsymptoticTerm {
  CVector coeff;
  cplx exponent;
  int logpow = 0;
};

using AsymptoticFunction = std::vector<AsymptoticTerm>;

enum class SpaceLabel { EHat, E, Selection };

inline const char* to_string(SpaceLabel l) {
  switch (l) {
    case SpaceLabel::EHat: return "Ehat_sigma";
    case SpaceLabel::E: return "E_sigma";
    case SpaceLabel::Selection: return "selection";
  }
  return "?";
}

struct AsymptoticSpace {
  std::vector<AsymptoticFunction> basis;
  double weight = 0.0;
  SpaceLabel label = SpaceLabel::Selection;

  std::size_t dim() const { return basis.size(); }
};

inline constexpr double kExponentTol = 1e-9;
inline constexpr double kRankTol = 1e-10;

inline bool same_exponent(cplx a, cplx b) { return std::abs(a - b) < kExponentTol * std::max(1.0, std::abs(a)); }

/// Value at (t, all cross-section coordinates).
inline CVector evaluate(const AsymptoticFunction& f, double t, Eigen::Index dim) {
  CVector out = CVector::Zero(dim);
  const double lt = std::log(t);
  for (const auto& term : f) out += term.coeff * (std::pow(cplx(t, 0.0), -term.exponent) * std::pow(lt, term.logpow));
  return out;
}

/// Index set of monomials t^{-p} log^k t.  Ordered by Re p descending (most
/// singular first), then by log power ascending.
class MonomialDictionary {
 public:
  struct Key {
    cplx exponent;
    int logpow;
  };

  explicit MonomialDictionary(Eigen::Index dim) : dim_(dim) {}

  void add(const AsymptoticFunction& f) {
    for (const auto& term : f) insert(term.exponent, term.logpow);
  }
  void add(const std::vector<AsymptoticFunction>& fs) {
    for (const auto& f : fs) add(f);
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(keys_.size()) * dim_; }
  const std::vector<Key>& keys() const { return keys_; }

  Eigen::Index find(cplx exponent, int logpow) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i].logpow == logpow && same_exponent(keys_[i].exponent, exponent)) return static_cast<Eigen::Index>(i);
    }
    return -1;
  }

  CVector coords(const AsymptoticFunction& f) const {
    CVector out = CVector::Zero(size());
    for (const auto& term : f) {
      const auto i = find(term.exponent, term.logpow);
      if (i < 0) fail(ErrorCode::InvalidInput, "monomial missing from dictionary");
      out.segment(i * dim_, dim_) += term.coeff;
    }
    return out;
  }

  CMatrix coords(const std::vector<AsymptoticFunction>& fs) const {
    CMatrix out(size(), static_cast<Eigen::Index>(fs.size()));
    for (std::size_t j = 0; j < fs.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = coords(fs[j]);
    return out;
  }

  /// Inverse of coords; coefficients below chop (relative to the largest) are dropped.
  AsymptoticFunction function(const CVector& c, double chop = 1e-12) const {
    AsymptoticFunction f;
    const double scale = c.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      CVector block = c.segment(static_cast<Eigen::Index>(i) * dim_, dim_);
      for (auto& v : block) {
        if (std::abs(v) <= chop * scale) v = 0.0;
      }
      if (!block.isZero(0.0)) f.push_back({block, keys_[i].exponent, keys_[i].logpow});
    }
    return f;
  }

 private:
  void insert(cplx exponent, int logpow) {
    if (find(exponent, logpow) >= 0) return;
    keys_.push_back({exponent, logpow});
    std::stable_sort(keys_.begin(), keys_.end(), [](const Key& a, const Key& b) {
      if (std::abs(a.exponent.real() - b.exponent.real()) > kExponentTol) return a.exponent.real() > b.exponent.real();
      if (std::abs(a.exponent.imag() - b.exponent.imag()) > kExponentTol) return a.exponent.imag() < b.exponent.imag();
      return a.logpow < b.logpow;
    });
  }

  Eigen::Index dim_;
  std::vector<Key> keys_;
};

inline Eigen::Index numerical_rank(const CMatrix& m, double tol = kRankTol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++r;
  }
  return r;
}

/// Orthonormal basis of the column range.
inline CMatrix range_basis(const CMatrix& m, double tol = kRankTol) {
  if (m.cols() == 0) return CMatrix(m.rows(), 0);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(0) > 0.0 && s(i) > tol * s(0)) ++r;
  }
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of the null space.
inline CMatrix null_basis(const CMatrix& m, double tol = kRankTol) {
  const auto cols = m.cols();
  if (m.rows() == 0) return CMatrix::Identity(cols, cols);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(0) > 0.0 && s(i) > tol * s(0)) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

/// Columns brought to reduced echelon form (each basis vector has a unit
/// pivot at the first coordinate no earlier vector uses).  Same span.
inline CMatrix echelon_columns(const CMatrix& basis, double tol = 1e-10) {
  CMatrix rows = basis.transpose();
  Eigen::Index pivot_row = 0;
  for (Eigen::Index c = 0; c < rows.cols() && pivot_row < rows.rows(); ++c) {
    Eigen::Index best;
    const double mag = rows.col(c).segment(pivot_row, rows.rows() - pivot_row).cwiseAbs().maxCoeff(&best);
    if (mag <= tol * std::max(1.0, rows.cwiseAbs().maxCoeff())) continue;
    best += pivot_row;
    rows.row(pivot_row).swap(rows.row(best));
    rows.row(pivot_row) /= rows(pivot_row, c);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      if (r != pivot_row) rows.row(r) -= rows(r, c) * rows.row(pivot_row);
    }
    ++pivot_row;
  }
  CMatrix out = rows.topRows(pivot_row).transpose();
  for (auto& v : out.reshaped()) {
    if (std::abs(v.real()) < 1e-13) v.real(0.0);
    if (std::abs(v.imag()) < 1e-13) v.imag(0.0);
  }
  return out;
}

inline std::vector<AsymptoticFunction> functions_from_columns(const MonomialDictionary& dict, const CMatrix& cols) {
  std::vector<AsymptoticFunction> out;
  for (Eigen::Index j = 0; j < cols.cols(); ++j) out.push_back(dict.function(cols.col(j)));
  return out;
}

/// Canonical (echelon) basis of span(fs).
inline std::vector<AsymptoticFunction> canonical_basis(const std::vector<AsymptoticFunction>& fs, Eigen::Index dim) {
  MonomialDictionary dict(dim);
  dict.add(fs);
  if (fs.empty() || dict.size() == 0) return {};
  return functions_from_columns(dict, echelon_columns(range_basis(dict.coords(fs))));
}

inline Eigen::Index span_dim(const std::vector<AsymptoticFunction>& fs, Eigen::Index dim) {
  MonomialDictionary dict(dim);
  dict.add(fs);
  if (fs.empty() || dict.size() == 0) return 0;
  return numerical_rank(dict.coords(fs));
}

inline bool linearly_independent(const std::vector<AsymptoticFunction>& fs, Eigen::Index dim) {
  return span_dim(fs, dim) == static_cast<Eigen::Index>(fs.size());
}

inline bool same_span(const std::vector<AsymptoticFunction>& a, const std::vector<AsymptoticFunction>& b, Eigen::Index dim,
                      double tol = 1e-9) {
  MonomialDictionary dict(dim);
  dict.add(a);
  dict.add(b);
  if (dict.size() == 0) return true;
  const CMatrix ca = dict.coords(a);
  const CMatrix cb = dict.coords(b);
  const auto ra = numerical_rank(ca, tol);
  const auto rb = numerical_rank(cb, tol);
  if (ra != rb) return false;
  CMatrix both(dict.size(), ca.cols() + cb.cols());
  both << ca, cb;
  return numerical_rank(both, tol) == ra;
}

inline AsymptoticSpace make_space(std::vector<AsymptoticFunction> basis, double weight, SpaceLabel label, Eigen::Index dim) {
  if (!linearly_independent(basis, dim)) fail(ErrorCode::InvalidInput, "asymptotic basis is linearly dependent");
  return {std::move(basis), weight, label};
}

inline AsymptoticFunction scaled(const AsymptoticFunction& f, cplx a) {
  AsymptoticFunction out = f;
  for (auto& term : out) term.coeff *= a;
  return out;
}

inline AsymptoticFunction sum(const AsymptoticFunction& f, const AsymptoticFunction& g) {
  AsymptoticFunction out = f;
  out.insert(out.end(), g.begin(), g.end());
  return out;
}

// ---------------------------------------------------------------------------
// Exponential polynomials in s = log t.

struct ExpTerm {
  cplx rate;  // e^{rate s}
  int pow = 0;
  CVector coeff;
};

using ExpPoly = std::vector<ExpTerm>;

inline ExpPoly to_exppoly(const AsymptoticFunction& f) {
  ExpPoly out;
  for (const auto& term : f) out.push_back({-term.exponent, term.logpow, term.coeff});
  return out;
}

inline ExpPoly derivative(const ExpPoly& f) {
  ExpPoly out;
  for (const auto& term : f) {
    if (term.rate != cplx(0.0)) out.push_back({term.rate, term.pow, term.rate * term.coeff});
    if (term.pow > 0) out.push_back({term.rate, term.pow - 1, static_cast<double>(term.pow) * term.coeff});
  }
  return out;
}

/// Multiply by e^{a s} and by a matrix on the left.
inline ExpPoly transform(const ExpPoly& f, cplx a, const CMatrix& m) {
  ExpPoly out;
  for (const auto& term : f) out.push_back({term.rate + a, term.pow, m * term.coeff});
  return out;
}

inline CVector evaluate(const ExpPoly& f, double s, Eigen::Index dim) {
  CVector out = CVector::Zero(dim);
  for (const auto& term : f) out += term.coeff * (std::exp(term.rate * s) * std::pow(s, term.pow));
  return out;
}

/// Scalar exponential polynomial given by <f, g> = g^* f.
struct ScalarExpTerm {
  cplx rate;
  int pow;
  cplx coeff;
};

inline std::vector<ScalarExpTerm> inner(const ExpPoly& f, const ExpPoly& g) {
  std::vector<ScalarExpTerm> out;
  for (const auto& a : f) {
    for (const auto& b : g) out.push_back({a.rate + std::conj(b.rate), a.pow + b.pow, b.coeff.dot(a.coeff)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cut-off functions omega(x): 1 for x <= lo, 0 for x >= hi, polynomial blend.

enum class CutoffShape { QuinticC2, SepticC3 };

class Cutoff {
 public:
  explicit Cutoff(CutoffShape shape = CutoffShape::QuinticC2, double lo = 1.0 / 3.0, double hi = 2.0 / 3.0)
      : shape_(shape), lo_(lo), hi_(hi) {
    // smoothstep S(y) coefficients, constant term first
    if (shape == CutoffShape::QuinticC2) {
      step_ = {0, 0, 0, 10, -15, 6};
    } else {
      step_ = {0, 0, 0, 0, 35, -84, 70, -20};
    }
  }

  CutoffShape shape() const { return shape_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  /// r-th derivative of omega at x.
  double derivative(int r, double x) const {
    if (x <= lo_) return r == 0 ? 1.0 : 0.0;
    if (x >= hi_) return 0.0;
    const double w = hi_ - lo_;
    const double y = (x - lo_) / w;
    // r-th derivative of S at y
    double val = 0.0;
    for (std::size_t k = static_cast<std::size_t>(r); k < step_.size(); ++k) {
      double falling = 1.0;
      for (int i = 0; i < r; ++i) falling *= static_cast<double>(k) - i;
      val += step_[k] * falling * std::pow(y, static_cast<double>(k) - r);
    }
    val *= std::pow(w, -r);
    return r == 0 ? 1.0 - val : -val;
  }

  double operator()(double x) const { return derivative(0, x); }

 private:
  CutoffShape shape_;
  double lo_, hi_;
  std::vector<double> step_;
};

/// Stirling numbers of the second kind S(i, r), i, r <= 8.
inline double stirling2(int i, int r) {
  static const auto table = [] {
    std::array<std::array<double, 9>, 9> t{};
    t[0][0] = 1.0;
    for (int a = 1; a < 9; ++a) {
      for (int b = 1; b <= a; ++b) t[a][b] = b * t[a - 1][b] + t[a - 1][b - 1];
    }
    return t;
  }();
  return table.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(r));
}

/// d^i/ds^i of omega(e^s / eps), i = 0..order.
inline std::vector<double> cutoff_log_derivatives(const Cutoff& omega, double s, double eps, int order) {
  const double x = std::exp(s) / eps;
  std::vector<double> out(static_cast<std::size_t>(order) + 1, 0.0);
  out[0] = omega(x);
  for (int i = 1; i <= order; ++i) {
    double v = 0.0;
    for (int r = 1; r <= i; ++r) v += stirling2(i, r) * std::pow(x, r) * omega.derivative(r, x);
    out[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

/// d^i/ds^i of omega(e^s/eps) f(s) for i = 0..order, given the derivatives of f.
inline std::vector<CVector> cut_derivatives(const std::vector<ExpPoly>& f_derivs, const Cutoff& omega, double s, double eps,
                                            int order, Eigen::Index dim) {
  const auto w = cutoff_log_derivatives(omega, s, eps, order);
  std::vector<CVector> fv;
  for (int i = 0; i <= order; ++i) fv.push_back(evaluate(f_derivs[static_cast<std::size_t>(i)], s, dim));
  std::vector<CVector> out;
  for (int i = 0; i <= order; ++i) {
    CVector acc = CVector::Zero(dim);
    double binom = 1.0;
    for (int r = 0; r <= i; ++r) {
      acc += binom * w[static_cast<std::size_t>(r)] * fv[static_cast<std::size_t>(i - r)];
      binom = binom * (i - r) / (r + 1);
    }
    out.push_back(acc);
  }
  return out;
}

inline std::vector<ExpPoly> derivative_ladder(const ExpPoly& f, int order) {
  std::vector<ExpPoly> out{f};
  for (int i = 1; i <= order; ++i) out.push_back(derivative(out.back()));
  return out;
}

}  // namespace conecalc
