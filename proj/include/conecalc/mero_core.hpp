// SPDX-License-Identifier: Apache-2.0
#pragma once

// Matrix polynomials in one complex variable and local Laurent data of their
// meromorphic inverses.  Laurent coefficients are obtained by trapezoidal
// quadrature on small circles, with the measure dz/(2 pi i).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "common.hpp"

namespace conecalc {

/// p(z) = sum_j coeffs[j] z^j with square N x N coefficients, constant term first.
class MatrixPolynomial {
 public:
  MatrixPolynomial() = default;

  explicit MatrixPolynomial(std::vector<CMatrix> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) fail(ErrorCode::ShapeMismatch, "matrix polynomial needs at least one coefficient");
    const auto n = coeffs_.front().rows();
    for (const auto& c : coeffs_) {
      if (c.rows() != n || c.cols() != n) fail(ErrorCode::ShapeMismatch, "coefficients must be square and of equal size");
    }
    // Trailing zero matrices do not count towards the degree.
    while (coeffs_.size() > 1 && coeffs_.back().isZero(0.0)) coeffs_.pop_back();
  }

  static MatrixPolynomial scalar(std::vector<cplx> coeffs) {
    std::vector<CMatrix> m;
    m.reserve(coeffs.size());
    for (auto c : coeffs) m.push_back(CMatrix::Constant(1, 1, c));
    return MatrixPolynomial(std::move(m));
  }

  static MatrixPolynomial zero(Eigen::Index dim) { return MatrixPolynomial({CMatrix::Zero(dim, dim)}); }

  Eigen::Index dim() const { return coeffs_.empty() ? 0 : coeffs_.front().rows(); }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<CMatrix>& coeffs() const { return coeffs_; }
  const CMatrix& coeff(int j) const { return coeffs_.at(static_cast<std::size_t>(j)); }
  bool is_zero() const { return coeffs_.size() == 1 && coeffs_.front().isZero(0.0); }

  /// Horner evaluation.
  CMatrix operator()(cplx z) const {
    CMatrix acc = coeffs_.back();
    for (int j = degree() - 1; j >= 0; --j) {
      acc *= z;
      acc += coeffs_[static_cast<std::size_t>(j)];
    }
    return acc;
  }

 private:
  std::vector<CMatrix> coeffs_;
};

inline CMatrix eval_poly(const MatrixPolynomial& p, cplx z) { return p(z); }

namespace detail {

// Coefficients of p(z + shift) by repeated synthetic division (Taylor shift).
inline std::vector<CMatrix> taylor_shift(const std::vector<CMatrix>& c, cplx shift) {
  std::vector<CMatrix> a = c;
  const int d = static_cast<int>(a.size()) - 1;
  for (int k = 0; k < d; ++k) {
    for (int j = d - 1; j >= k; --j) a[j] += shift * a[j + 1];
  }
  return a;
}

inline double inverse_condition(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace detail

/// (T^rho p)(z) = p(z + rho).
inline MatrixPolynomial shift_family(const MatrixPolynomial& p, double rho) {
  if (rho == 0.0) return p;
  return MatrixPolynomial(detail::taylor_shift(p.coeffs(), cplx(rho, 0.0)));
}

/// Evaluates z -> p(z + rho)^{-1} away from the poles.
class ShiftedInverse {
 public:
  ShiftedInverse(MatrixPolynomial base, double shift) : base_(std::move(base)), shift_(shift) {}

  const MatrixPolynomial& base() const { return base_; }
  double shift() const { return shift_; }

  CMatrix operator()(cplx z) const {
    const CMatrix m = base_(z + shift_);
    Eigen::PartialPivLU<CMatrix> lu(m);
    return lu.inverse();
  }

 private:
  MatrixPolynomial base_;
  double shift_;
};

inline ShiftedInverse shift_inverse(const MatrixPolynomial& p, double rho) { return ShiftedInverse(p, rho); }

/// A finite eigenvalue of the polynomial eigenvalue problem p(z)v = 0 with its
/// algebraic multiplicity (number of clustered companion eigenvalues).
struct PoleLocation {
  cplx value;
  int multiplicity = 1;
};

struct PoleSearchOptions {
  double infinity_cutoff = 1e8;  // |z| beyond this counts as an eigenvalue at infinity
  double cluster_tol = 1e-6;     // defective eigenvalues are only sqrt(eps) accurate
};

/// All finite z with p(z) singular, clustered and sorted by (Re, Im).
/// Uses a Moebius-shifted reversal so that singular leading (and constant)
/// coefficients are handled: with w = 1/(z - s) and p(s) invertible,
/// w^d p(s + 1/w) has invertible leading coefficient p(s).
inline std::vector<PoleLocation> all_poles(const MatrixPolynomial& p, const PoleSearchOptions& opt = {}) {
  const int d = p.degree();
  const auto n = p.dim();
  if (d == 0) {
    if (detail::inverse_condition(p.coeff(0)) < 1e-14) fail(ErrorCode::SingularFamily, "constant polynomial is singular");
    return {};
  }

  // Deterministic candidate shifts; choose the best-conditioned one.
  cplx best_shift{};
  double best_rcond = -1.0;
  for (int k = 0; k < 8; ++k) {
    const cplx s = std::polar(0.37 * (1.0 + 0.61 * k), 0.7 + 1.3 * k);
    const double rc = detail::inverse_condition(p(s));
    if (rc > best_rcond) {
      best_rcond = rc;
      best_shift = s;
    }
    if (rc > 1e-3) break;
  }
  if (best_rcond < 1e-13) fail(ErrorCode::SingularFamily, "det p(z) vanishes identically (to working precision)");

  const auto q = detail::taylor_shift(p.coeffs(), best_shift);  // p(s + y) = sum q_k y^k
  Eigen::PartialPivLU<CMatrix> lead(q[0]);
  const Eigen::Index size = static_cast<Eigen::Index>(d) * n;
  CMatrix comp = CMatrix::Zero(size, size);
  for (int b = 0; b + 1 < d; ++b) comp.block(b * n, (b + 1) * n, n, n).setIdentity();
  // w^d + sum_{k=1}^d q0^{-1} q_k w^{d-k}
  for (int k = 1; k <= d; ++k) {
    comp.block((d - 1) * n, (d - k) * n, n, n) = -lead.solve(q[static_cast<std::size_t>(k)]);
  }
  Eigen::ComplexEigenSolver<CMatrix> es(comp, false);
  if (es.info() != Eigen::Success) fail(ErrorCode::SingularFamily, "companion eigensolver failed");

  std::vector<cplx> roots;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx w = es.eigenvalues()(i);
    if (std::abs(w) * opt.infinity_cutoff < 1.0) continue;
    const cplx z = best_shift + 1.0 / w;
    if (std::abs(z) > opt.infinity_cutoff) continue;
    roots.push_back(z);
  }
  std::sort(roots.begin(), roots.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });

  // Single-linkage clustering; a cluster is represented by its mean, which is
  // accurate to working precision even for defective eigenvalues.
  std::vector<bool> used(roots.size(), false);
  std::vector<PoleLocation> out;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> members{i};
    used[i] = true;
    for (std::size_t m = 0; m < members.size(); ++m) {
      for (std::size_t j = 0; j < roots.size(); ++j) {
        if (used[j]) continue;
        const cplx a = roots[members[m]];
        if (std::abs(roots[j] - a) < opt.cluster_tol * std::max(1.0, std::abs(a))) {
          used[j] = true;
          members.push_back(j);
        }
      }
    }
    cplx mean{};
    for (auto idx : members) mean += roots[idx];
    mean /= static_cast<double>(members.size());
    out.push_back({mean, static_cast<int>(members.size())});
  }
  std::sort(out.begin(), out.end(), [](const PoleLocation& a, const PoleLocation& b) {
    return a.value.real() != b.value.real() ? a.value.real() < b.value.real() : a.value.imag() < b.value.imag();
  });
  return out;
}

/// Poles of p^{-1} in the open strip a < Re z < b, each listed once.
inline std::vector<cplx> poles_of_inverse(const MatrixPolynomial& p, double a, double b, const PoleSearchOptions& opt = {}) {
  std::vector<cplx> out;
  for (const auto& pl : all_poles(p, opt)) {
    if (pl.value.real() > a && pl.value.real() < b) out.push_back(pl.value);
  }
  return out;
}

/// Principal part of a meromorphic matrix function at one pole.
/// principal[k-1] multiplies (z - pole)^{-k}; order == principal.size().
struct LocalLaurentData {
  cplx pole;
  int order = 0;
  std::vector<CMatrix> principal;
  CMatrix regular0;  // value of the regular part at the pole

  const CMatrix& coefficient(int k) const { return principal.at(static_cast<std::size_t>(k - 1)); }
  const CMatrix& residue() const { return principal.front(); }
};

using MatrixFunction = std::function<CMatrix(cplx)>;

/// Laurent coefficients c_k, k in [kmin, kmax], of F around sigma from the
/// N-point trapezoidal rule on |z - sigma| = radius.  Result index k - kmin.
inline std::vector<CMatrix> laurent_coefficients(const MatrixFunction& f, cplx sigma, double radius, int nodes, int kmin,
                                                 int kmax) {
  std::vector<CMatrix> out;
  for (int j = 0; j < nodes; ++j) {
    const double theta = 2.0 * kPi * (j + 0.5) / nodes;
    const cplx dz = std::polar(radius, theta);
    const CMatrix val = f(sigma + dz);
    if (out.empty()) out.assign(static_cast<std::size_t>(kmax - kmin + 1), CMatrix::Zero(val.rows(), val.cols()));
    for (int k = kmin; k <= kmax; ++k) out[static_cast<std::size_t>(k - kmin)] += val * std::pow(dz, -k);
  }
  for (auto& c : out) c /= static_cast<double>(nodes);
  return out;
}

struct LaurentOptions {
  double radius = 0.0;       // <= 0: 0.4 x distance to the nearest other pole
  int quad_points = 256;
  double order_tol = 1e-9;   // relative size below which a principal coefficient counts as zero
  double doubling_tol = 1e-8;
};

namespace detail {

inline double nearest_other_pole(const std::vector<PoleLocation>& poles, cplx sigma, double same_tol) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pl : poles) {
    const double d = std::abs(pl.value - sigma);
    if (d > same_tol) best = std::min(best, d);
  }
  return best;
}

inline double default_radius(double nearest) { return std::isfinite(nearest) ? 0.4 * nearest : 0.4; }

}  // namespace detail

/// Principal part of p^{-1} at the pole sigma.
inline LocalLaurentData local_laurent(const MatrixPolynomial& p, cplx sigma, LaurentOptions opt = {}) {
  const auto poles = all_poles(p);
  const double nearest = detail::nearest_other_pole(poles, sigma, 1e-6 * std::max(1.0, std::abs(sigma)));
  if (opt.radius <= 0.0) opt.radius = detail::default_radius(nearest);
  if (nearest <= opt.radius) fail(ErrorCode::ContourTooWide, "another pole lies inside the contour");

  const int kmax = std::max(1, p.degree() * static_cast<int>(p.dim()));
  const MatrixFunction inv = [&p](cplx z) -> CMatrix { return Eigen::PartialPivLU<CMatrix>(p(z)).inverse(); };

  double scale = 0.0;
  for (int j = 0; j < opt.quad_points; ++j) {
    const cplx z = sigma + std::polar(opt.radius, 2.0 * kPi * (j + 0.5) / opt.quad_points);
    scale = std::max(scale, inv(z).norm());
  }

  const auto coarse = laurent_coefficients(inv, sigma, opt.radius, opt.quad_points, -kmax, 0);
  const auto fine = laurent_coefficients(inv, sigma, opt.radius, 2 * opt.quad_points, -kmax, 0);
  for (int k = -kmax; k <= 0; ++k) {
    const auto idx = static_cast<std::size_t>(k + kmax);
    const double weight = std::pow(opt.radius, k);  // magnitude of the term on the contour
    if ((coarse[idx] - fine[idx]).norm() * weight > opt.doubling_tol * scale) {
      fail(ErrorCode::QuadratureDiverged, "doubling the quadrature changed a Laurent coefficient");
    }
  }

  LocalLaurentData out;
  out.pole = sigma;
  for (int k = kmax; k >= 1; --k) {
    const auto idx = static_cast<std::size_t>(kmax - k);
    if (fine[idx].norm() * std::pow(opt.radius, -k) > opt.order_tol * scale) {
      out.order = k;
      break;
    }
  }
  if (out.order == 0) fail(ErrorCode::InvalidInput, "point is not a pole of the inverse");
  for (int k = 1; k <= out.order; ++k) out.principal.push_back(fine[static_cast<std::size_t>(kmax - k)]);
  out.regular0 = fine[static_cast<std::size_t>(kmax)];
  return out;
}

inline LocalLaurentData local_laurent(const MatrixPolynomial& p, cplx sigma, double radius, int quad_points) {
  LaurentOptions opt;
  opt.radius = radius;
  opt.quad_points = quad_points;
  return local_laurent(p, sigma, opt);
}

}  // namespace conecalc
