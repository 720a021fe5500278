// SPDX-License-Identifier: Apache-2.0
#pragma once

// Asymptotics spaces of maximal domains, the maps theta_sigma between the
// spaces of A and of its model cone operator, boundary pairings and the
// complement rules for Laplacian-type selections.

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "asymptotics.hpp"
#include "conormal_calculus.hpp"

namespace conecalc {

/// floor(Re sigma + mu + gamma - (n+1)/2); refuses integer boundaries.
inline int mu_sigma(cplx sigma, double gamma, int mu, int n) {
  const double x = sigma.real() + mu + gamma - 0.5 * (n + 1);
  if (std::abs(x - std::round(x)) < 1e-8) fail(ErrorCode::DegenerateWeight, "Re sigma + mu + gamma - (n+1)/2 is an integer");
  return static_cast<int>(std::floor(x));
}

/// Formal adjoint with respect to t^n dt: t^m c D^k has adjoint t^m c^* (m + n + 1 - D)^k.
inline ConormalSequence formal_adjoint(const ConormalSequence& seq) {
  ConormalSequence out = seq;
  out.fs.clear();
  const auto dim = seq.dim();
  for (std::size_t l = 0; l < seq.fs.size(); ++l) {
    const auto& f = seq.fs[l];
    const double c = static_cast<double>(l) - seq.mu + seq.n + 1;
    std::vector<CMatrix> coeffs(static_cast<std::size_t>(f.degree()) + 1, CMatrix::Zero(dim, dim));
    for (int k = 0; k <= f.degree(); ++k) {
      const CMatrix a = f.coeff(k).adjoint();
      double binom = 1.0;
      for (int j = 0; j <= k; ++j) {
        coeffs[static_cast<std::size_t>(j)] += a * (binom * std::pow(c, k - j) * ((j % 2) ? -1.0 : 1.0));
        binom = binom * (k - j) / (j + 1);
      }
    }
    out.fs.emplace_back(std::move(coeffs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single pole.

/// Principal-part calculus at one pole sigma of f_0^{-1}.  A vector U =
/// (u_0, ..., u_{m-1}) parametrizes the principal part
///   Pi_sigma(f_0^{-1} u^) = sum_k c_k (z - sigma)^{-k-1},  c_k = sum_i A_{k+1+i} u_i,
/// where A_j multiplies (z - sigma)^{-j} in f_0^{-1}.
class PoleCalculus {
 public:
  PoleCalculus(const ConormalSequence& seq, const ConormalRecursion* rec, cplx sigma, int mu_s)
      : sigma_(sigma), mu_s_(mu_s), dim_(seq.dim()), laurent_(local_laurent(seq.fs.front(), sigma)) {
    if (mu_s > 0 && (rec == nullptr || rec->depth() < mu_s)) fail(ErrorCode::RecursionTooShallow, "recursion depth below mu_sigma");
    const int m = laurent_.order;
    int max_order = 1;  // algebraic multiplicity bounds the pole order
    if (mu_s > 0) {
      for (const auto& pl : all_poles(seq.fs.front())) max_order = std::max(max_order, pl.multiplicity);
    }
    for (int l = 1; l <= mu_s; ++l) {
      double nearest = std::numeric_limits<double>::infinity();
      for (auto c : rec->pole_candidates(l)) {
        const double d = std::abs(c - sigma);
        if (d > 1e-6) nearest = std::min(nearest, d);
      }
      for (auto c : rec->f0_poles()) {
        const double d = std::abs(c - sigma);
        if (d > 1e-6) nearest = std::min(nearest, d);
      }
      const double radius = std::isfinite(nearest) ? 0.4 * nearest : 0.4;
      const int rmin = -l * max_order;
      const MatrixFunction g = [rec, l](cplx z) { return rec->g(l, z); };
      g_laurent_.push_back({rmin, laurent_coefficients(g, sigma, radius, 256, rmin, m - 1)});
    }
  }

  int order() const { return laurent_.order; }
  int mu_s() const { return mu_s_; }
  Eigen::Index params() const { return laurent_.order * dim_; }
  const LocalLaurentData& laurent() const { return laurent_; }

  /// c_0..c_{m-1}.
  std::vector<CVector> principal(const CVector& u) const {
    const int m = laurent_.order;
    std::vector<CVector> c(static_cast<std::size_t>(m), CVector::Zero(dim_));
    for (int k = 0; k < m; ++k) {
      for (int i = 0; k + 1 + i <= m; ++i) c[static_cast<std::size_t>(k)] += laurent_.coefficient(k + 1 + i) * u.segment(i * dim_, dim_);
    }
    return c;
  }

  /// G^{(0)} u: sum_k (-1)^k / k! c_k t^{-sigma} log^k t.
  AsymptoticFunction hat_function(const CVector& u) const {
    const auto c = principal(u);
    AsymptoticFunction f;
    double fact = 1.0;
    for (int k = 0; k < order(); ++k) {
      if (k > 0) fact *= k;
      f.push_back({c[static_cast<std::size_t>(k)] * (((k % 2) ? -1.0 : 1.0) / fact), sigma_, k});
    }
    return f;
  }

  /// (G^{(0)} + ... + G^{(mu_sigma)}) u.
  AsymptoticFunction e_function(const CVector& u) const {
    const auto c = principal(u);
    AsymptoticFunction f = hat_function(u);
    for (int l = 1; l <= mu_s_; ++l) {
      const auto& [rmin, coeffs] = g_laurent_[static_cast<std::size_t>(l - 1)];
      std::map<int, CVector> by_log;
      for (int k = 0; k < order(); ++k) {
        for (int r = rmin; r <= k; ++r) {
          const int i = k - r;
          double fact = 1.0;
          for (int q = 2; q <= i; ++q) fact *= q;
          const CVector term = coeffs[static_cast<std::size_t>(r - rmin)] * c[static_cast<std::size_t>(k)] * (((i % 2) ? -1.0 : 1.0) / fact);
          auto it = by_log.find(i);
          if (it == by_log.end()) {
            by_log.emplace(i, term);
          } else {
            it->second += term;
          }
        }
      }
      for (auto& [i, v] : by_log) f.push_back({v, sigma_ - static_cast<double>(l), i});
    }
    return f;
  }

 private:
  cplx sigma_;
  int mu_s_;
  Eigen::Index dim_;
  LocalLaurentData laurent_;
  std::vector<std::pair<int, std::vector<CMatrix>>> g_laurent_;  // (rmin, B_rmin..B_{m-1}) per l
};

struct PoleDomain {
  cplx sigma;
  int order = 1;
  int mu_s = 0;
  AsymptoticSpace hat;
  AsymptoticSpace e;
  CMatrix theta;  // theta_sigma: e-basis coordinates -> hat-basis coordinates
};

namespace detail {

inline AsymptoticFunction chopped(const AsymptoticFunction& f, Eigen::Index dim, double rel = 1e-11) {
  MonomialDictionary dict(dim);
  dict.add(f);
  return dict.function(dict.coords(f), rel);
}

}  // namespace detail

/// E_sigma together with Ehat_sigma in paired bases (theta_sigma = identity).
inline PoleDomain e_space(const ConormalSequence& seq, const RecursionResult* recursion, cplx sigma, double gamma) {
  const int ms = mu_sigma(sigma, gamma, seq.mu, seq.n);
  const ConormalRecursion* rec = recursion ? recursion->engine.get() : nullptr;
  PoleCalculus calc(seq, rec, sigma, ms);
  const auto dim = seq.dim();

  std::vector<AsymptoticFunction> hats;
  for (Eigen::Index j = 0; j < calc.params(); ++j) hats.push_back(calc.hat_function(CVector::Unit(calc.params(), j)));
  MonomialDictionary dict(dim);
  dict.add(hats);
  const CMatrix m0 = dict.coords(hats);
  const CMatrix hat_cols = echelon_columns(range_basis(m0));

  PoleDomain out;
  out.sigma = sigma;
  out.order = calc.order();
  out.mu_s = ms;
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod;
  cod.setThreshold(kRankTol);
  cod.compute(m0);
  std::vector<AsymptoticFunction> hat_basis, e_basis;
  for (Eigen::Index j = 0; j < hat_cols.cols(); ++j) {
    const CVector u = cod.solve(hat_cols.col(j));
    hat_basis.push_back(dict.function(hat_cols.col(j)));
    e_basis.push_back(detail::chopped(calc.e_function(u), dim));
  }
  out.hat = {hat_basis, gamma, SpaceLabel::EHat};
  out.e = {e_basis, gamma, SpaceLabel::E};
  out.theta = CMatrix::Identity(hat_cols.cols(), hat_cols.cols());
  return out;
}

/// Ehat_sigma alone (no recursion needed).
inline AsymptoticSpace hat_space(const ConormalSequence& seq, cplx sigma) {
  PoleCalculus calc(seq, nullptr, sigma, 0);
  std::vector<AsymptoticFunction> hats;
  for (Eigen::Index j = 0; j < calc.params(); ++j) hats.push_back(calc.hat_function(CVector::Unit(calc.params(), j)));
  return {canonical_basis(hats, seq.dim()), 0.0, SpaceLabel::EHat};
}

// ---------------------------------------------------------------------------
// All poles of a weight strip.

struct DomainCorrespondence {
  double gamma = 0.0;
  Eigen::Index dim = 0;
  std::vector<PoleDomain> poles;

  std::vector<AsymptoticFunction> e_basis() const {
    std::vector<AsymptoticFunction> out;
    for (const auto& p : poles) out.insert(out.end(), p.e.basis.begin(), p.e.basis.end());
    return out;
  }
  std::vector<AsymptoticFunction> hat_basis() const {
    std::vector<AsymptoticFunction> out;
    for (const auto& p : poles) out.insert(out.end(), p.hat.basis.begin(), p.hat.basis.end());
    return out;
  }
  /// Block diagonal Theta in the stacked bases.
  CMatrix theta() const {
    Eigen::Index total = 0;
    for (const auto& p : poles) total += p.theta.rows();
    CMatrix out = CMatrix::Zero(total, total);
    Eigen::Index at = 0;
    for (const auto& p : poles) {
      out.block(at, at, p.theta.rows(), p.theta.cols()) = p.theta;
      at += p.theta.rows();
    }
    return out;
  }
};

inline DomainCorrespondence build_correspondence(const ConormalSequence& seq, double gamma) {
  DomainCorrespondence corr;
  corr.gamma = gamma;
  corr.dim = seq.dim();
  const auto poles = pole_set(seq, gamma);
  int depth = 0;
  for (const auto& p : poles) depth = std::max(depth, mu_sigma(p.sigma, gamma, seq.mu, seq.n));
  std::optional<RecursionResult> rec;
  if (depth > 0) rec = run_recursion(seq, depth);
  for (const auto& p : poles) corr.poles.push_back(e_space(seq, rec ? &*rec : nullptr, p.sigma, gamma));
  return corr;
}

enum class Direction { Forward, Inverse };

namespace detail {

/// Coordinates of fs in basis; NotInDomainSpan if some f is outside the span.
inline CMatrix coordinates_in(const std::vector<AsymptoticFunction>& basis, const std::vector<AsymptoticFunction>& fs,
                              Eigen::Index dim) {
  MonomialDictionary dict(dim);
  dict.add(basis);
  dict.add(fs);
  const CMatrix b = dict.coords(basis);
  const CMatrix f = dict.coords(fs);
  if (fs.empty()) return CMatrix(static_cast<Eigen::Index>(basis.size()), 0);
  if (basis.empty()) {
    if (f.norm() > 0.0) fail(ErrorCode::NotInDomainSpan, "selection outside the asymptotics space");
    return CMatrix(0, f.cols());
  }
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod;
  cod.setThreshold(kRankTol);
  cod.compute(b);
  const CMatrix x = cod.solve(f);
  const double resid = (b * x - f).norm();
  if (resid > 1e-9 * std::max(1.0, f.norm())) fail(ErrorCode::NotInDomainSpan, "selection outside the asymptotics space");
  return x;
}

inline std::vector<AsymptoticFunction> combine(const std::vector<AsymptoticFunction>& basis, const CMatrix& coeffs) {
  std::vector<AsymptoticFunction> out;
  for (Eigen::Index j = 0; j < coeffs.cols(); ++j) {
    AsymptoticFunction f;
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
      if (coeffs(i, j) != cplx(0.0)) f = sum(f, scaled(basis[static_cast<std::size_t>(i)], coeffs(i, j)));
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace detail

/// Image of a selection under Theta (Forward: E -> Ehat) or Theta^{-1}.
inline AsymptoticSpace theta_on_selection(const DomainCorrespondence& corr, const AsymptoticSpace& sel, Direction dir) {
  const auto from = dir == Direction::Forward ? corr.e_basis() : corr.hat_basis();
  const auto to = dir == Direction::Forward ? corr.hat_basis() : corr.e_basis();
  const CMatrix x = detail::coordinates_in(from, sel.basis, corr.dim);
  const CMatrix theta = corr.theta();
  const CMatrix y = dir == Direction::Forward ? CMatrix(theta * x) : CMatrix(theta.partialPivLu().solve(x));
  return {canonical_basis(detail::combine(to, y), corr.dim), sel.weight, SpaceLabel::Selection};
}

// ---------------------------------------------------------------------------
// Boundary pairing [u, v] = (A(omega u), omega v) - (omega u, A^t(omega v)) in L^2(t^n dt).

namespace detail {

struct OperatorTerm {
  CMatrix c;  // coefficient
  int m;      // power of t
  int k;      // power of D = -t d/dt
};

inline std::vector<OperatorTerm> operator_terms(const ConormalSequence& op) {
  std::vector<OperatorTerm> out;
  for (std::size_t l = 0; l < op.fs.size(); ++l) {
    const auto& f = op.fs[l];
    for (int k = 0; k <= f.degree(); ++k) {
      if (!f.coeff(k).isZero(0.0)) out.push_back({f.coeff(k), static_cast<int>(l) - op.mu, k});
    }
  }
  return out;
}

}  // namespace detail

/// Exact value from the boundary concomitant as t -> 0.  NoConvergence if the
/// concomitant has a nonvanishing divergent part (u or v outside the maximal domains).
inline cplx pairing_closed_form(const AsymptoticFunction& u, const AsymptoticFunction& v, const ConormalSequence& op) {
  const ExpPoly ue = to_exppoly(u);
  const ExpPoly ve = to_exppoly(v);
  std::vector<ScalarExpTerm> acc;
  for (const auto& term : detail::operator_terms(op)) {
    if (term.k == 0) continue;
    const auto du = derivative_ladder(ue, term.k);
    const auto dw = derivative_ladder(transform(ve, static_cast<double>(term.m + op.n + 1), term.c.adjoint()), term.k);
    const double outer = (term.k % 2) ? 1.0 : -1.0;  // -(-1)^k
    for (int i = 0; i < term.k; ++i) {
      const double sign = outer * ((i % 2) ? -1.0 : 1.0);
      for (auto s : inner(du[static_cast<std::size_t>(term.k - 1 - i)], dw[static_cast<std::size_t>(i)])) {
        s.coeff *= sign;
        acc.push_back(s);
      }
    }
  }
  // merge equal (rate, pow)
  std::vector<ScalarExpTerm> merged;
  double scale = 0.0;
  for (const auto& s : acc) {
    scale = std::max(scale, std::abs(s.coeff));
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const ScalarExpTerm& q) { return q.pow == s.pow && std::abs(q.rate - s.rate) < kExponentTol; });
    if (it == merged.end()) {
      merged.push_back(s);
    } else {
      it->coeff += s.coeff;
    }
  }
  cplx value = 0.0;
  for (const auto& s : merged) {
    if (std::abs(s.rate) < kExponentTol && s.pow == 0) {
      value += s.coeff;
    } else if (s.rate.real() <= kExponentTol && std::abs(s.coeff) > 1e-8 * std::max(1.0, scale)) {
      fail(ErrorCode::NoConvergence, "boundary concomitant diverges as t -> 0");
    }
  }
  return value;
}

struct PairingQuadrature {
  Cutoff cutoff{};
  std::array<double, 3> eps_ladder{1e-2, 5e-3, 2.5e-3};
  double t_min = 1e-6;
  double panel_width = 0.5;  // in log t
  int gauss_points = 8;
  double cauchy_tol = 1e-5;
  bool analytic_tail = true;  // integrate the uncut defect on (0, t_min) in closed form
};

struct PairingValue {
  cplx value;
  double error = 0.0;
  std::array<cplx, 3> ladder{};
  double fitted_rate = 0.0;  // s in O(eps^s); 0 when the ladder is flat
};

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  // Golub-Welsch
  RMatrix j = RMatrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    j(i, i - 1) = b;
    j(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> es(j);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    w[static_cast<std::size_t>(i)] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
  return {x, w};
}

/// Panels of width <= h covering [a, b], Gauss nodes in each.
inline void panel_nodes(double a, double b, double h, int points, std::vector<double>& s, std::vector<double>& w) {
  if (b <= a) return;
  const auto [x, wx] = gauss_legendre(points);
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / h)));
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s.push_back(lo + 0.5 * width * (x[i] + 1.0));
      w.push_back(0.5 * width * wx[i]);
    }
  }
}

/// int_{-inf}^{s0} of the uncut Green defect sum <(-d)^k u, W> - <u, d^k W>.
inline cplx defect_tail(const ExpPoly& ue, const ExpPoly& ve, const std::vector<OperatorTerm>& terms, int n, double s0) {
  std::vector<ScalarExpTerm> acc;
  for (const auto& term : terms) {
    const auto du = derivative_ladder(ue, term.k);
    const auto dw = derivative_ladder(transform(ve, static_cast<double>(term.m + n + 1), term.c.adjoint()), term.k);
    const double sign = (term.k % 2) ? -1.0 : 1.0;
    for (auto q : inner(du[static_cast<std::size_t>(term.k)], dw[0])) {
      q.coeff *= sign;
      acc.push_back(q);
    }
    for (auto q : inner(du[0], dw[static_cast<std::size_t>(term.k)])) {
      q.coeff = -q.coeff;
      acc.push_back(q);
    }
  }
  std::vector<ScalarExpTerm> merged;
  double scale = 0.0;
  for (const auto& q : acc) {
    scale = std::max(scale, std::abs(q.coeff));
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const ScalarExpTerm& r) { return r.pow == q.pow && std::abs(r.rate - q.rate) < kExponentTol; });
    if (it == merged.end()) {
      merged.push_back(q);
    } else {
      it->coeff += q.coeff;
    }
  }
  cplx total = 0.0;
  for (const auto& q : merged) {
    if (std::abs(q.coeff) <= 1e-12 * std::max(1.0, scale)) continue;
    if (q.rate.real() <= kExponentTol) fail(ErrorCode::NoConvergence, "Green defect is not integrable at t = 0");
    // I_j = (s0^j e^{rate s0} - j I_{j-1}) / rate
    const cplx e = std::exp(q.rate * s0);
    cplx ij = e / q.rate;
    for (int j = 1; j <= q.pow; ++j) ij = (std::pow(s0, j) * e - static_cast<double>(j) * ij) / q.rate;
    total += q.coeff * ij;
  }
  return total;
}

/// One ladder point: integral over s of the Green defect.
inline cplx pairing_at(const AsymptoticFunction& u, const AsymptoticFunction& v, const ConormalSequence& op,
                       const PairingQuadrature& q, double eps) {
  const auto dim = op.dim();
  const auto terms = operator_terms(op);
  int order = 0;
  for (const auto& t : terms) order = std::max(order, t.k);
  const auto du = derivative_ladder(to_exppoly(u), order);
  const ExpPoly ve = to_exppoly(v);
  std::vector<std::vector<ExpPoly>> dw;
  for (const auto& t : terms) dw.push_back(derivative_ladder(transform(ve, static_cast<double>(t.m + op.n + 1), t.c.adjoint()), t.k));

  std::vector<double> s, w;
  const double s0 = std::log(q.t_min);
  const double s1 = std::log(eps * q.cutoff.lo());
  const double s2 = std::log(eps * q.cutoff.hi());
  panel_nodes(s0, s1, q.panel_width, q.gauss_points, s, w);
  panel_nodes(s1, s2, 0.25 * (s2 - s1), q.gauss_points, s, w);

  cplx total = 0.0;
  for (std::size_t p = 0; p < s.size(); ++p) {
    const auto cu = cut_derivatives(du, q.cutoff, s[p], eps, order, dim);
    cplx val = 0.0;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const int k = terms[t].k;
      const auto cw = cut_derivatives(dw[t], q.cutoff, s[p], eps, k, dim);
      const double sign = (k % 2) ? -1.0 : 1.0;
      val += cw[0].dot(cu[static_cast<std::size_t>(k)]) * sign - cw[static_cast<std::size_t>(k)].dot(cu[0]);
    }
    total += w[p] * val;
  }
  if (q.analytic_tail) total += defect_tail(du.front(), ve, terms, op.n, s0);
  return total;
}

}  // namespace detail

/// eps -> 0 limit of the cut-off Green defect, Richardson-extrapolated over the ladder.
inline PairingValue pairing_quadrature(const AsymptoticFunction& u, const AsymptoticFunction& v, const ConormalSequence& op,
                                       const PairingQuadrature& q = {}) {
  PairingValue out;
  for (std::size_t i = 0; i < 3; ++i) out.ladder[i] = detail::pairing_at(u, v, op, q, q.eps_ladder[i]);
  const cplx d1 = out.ladder[0] - out.ladder[1];
  const cplx d2 = out.ladder[1] - out.ladder[2];
  if (std::abs(d2) > q.cauchy_tol) fail(ErrorCode::NoConvergence, "pairing ladder is not converging");
  const double scale = std::max(1.0, std::abs(out.ladder[2]));
  out.value = out.ladder[2];
  out.error = std::abs(d2);
  if (std::abs(d2) > 1e-13 * scale && std::abs(d1) > std::abs(d2)) {
    const double ratio = q.eps_ladder[1] / q.eps_ladder[2];
    out.fitted_rate = std::log(std::abs(d1) / std::abs(d2)) / std::log(ratio);
    const cplx corr = d2 / (std::pow(ratio, out.fitted_rate) - 1.0);
    out.value = out.ladder[2] - corr;
    out.error = std::abs(corr);
  }
  return out;
}

enum class PairingMethod { ClosedForm, Quadrature };

/// [left_i, right_j] for the operator op; right functions belong to the formal adjoint.
struct PairingForm {
  std::vector<AsymptoticFunction> left;
  std::vector<AsymptoticFunction> right;
  CMatrix values;
  PairingMethod method = PairingMethod::ClosedForm;
  PairingQuadrature quad{};
  Eigen::Index dim = 0;
};

inline PairingForm build_pairing_form(const ConormalSequence& op, std::vector<AsymptoticFunction> left,
                                      std::vector<AsymptoticFunction> right, PairingMethod method = PairingMethod::ClosedForm,
                                      const PairingQuadrature& quad = {}) {
  PairingForm form;
  form.method = method;
  form.quad = quad;
  form.dim = op.dim();
  form.values = CMatrix::Zero(static_cast<Eigen::Index>(left.size()), static_cast<Eigen::Index>(right.size()));
  for (std::size_t i = 0; i < left.size(); ++i) {
    for (std::size_t j = 0; j < right.size(); ++j) {
      form.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          method == PairingMethod::ClosedForm ? pairing_closed_form(left[i], right[j], op) : pairing_quadrature(left[i], right[j], op, quad).value;
    }
  }
  form.left = std::move(left);
  form.right = std::move(right);
  return form;
}

/// Pairing form between E_{gamma,max}(A) and E_{-gamma,max}(A^t).
inline PairingForm maximal_pairing(const ConormalSequence& op, double gamma, PairingMethod method = PairingMethod::ClosedForm,
                                   const PairingQuadrature& quad = {}) {
  const auto left = build_correspondence(op, gamma).e_basis();
  const auto right = build_correspondence(formal_adjoint(op), -gamma).e_basis();
  return build_pairing_form(op, left, right, method, quad);
}

/// {v in span(right) : [u, v] = 0 for all u in sel}.  The form is
/// sesquilinear, [x, y] = x^T P conj(y) in coordinates.
inline AsymptoticSpace orthogonal_complement(const AsymptoticSpace& sel, const PairingForm& form) {
  const auto& p = form.values;
  if (p.rows() != p.cols() || (p.rows() > 0 && numerical_rank(p) < p.rows())) fail(ErrorCode::DegeneratePairing, "pairing form is degenerate");
  const CMatrix x = detail::coordinates_in(form.left, sel.basis, form.dim);
  const CMatrix lhs = x.transpose() * p;
  const CMatrix y = (lhs.rows() == 0 ? CMatrix::Identity(p.cols(), p.cols()) : null_basis(lhs)).conjugate();
  return {canonical_basis(detail::combine(form.right, y), form.dim), -sel.weight, SpaceLabel::Selection};
}

/// The complement taken in the left space (for S^perp^perp checks): {u : [u, v] = 0 for all v in sel}.
inline AsymptoticSpace orthogonal_complement_left(const AsymptoticSpace& sel, const PairingForm& form) {
  const auto& p = form.values;
  if (p.rows() != p.cols() || (p.rows() > 0 && numerical_rank(p) < p.rows())) fail(ErrorCode::DegeneratePairing, "pairing form is degenerate");
  const CMatrix y = detail::coordinates_in(form.right, sel.basis, form.dim);
  const CMatrix lhs = (p * y.conjugate()).transpose();
  const CMatrix x = lhs.rows() == 0 ? CMatrix::Identity(p.rows(), p.rows()) : null_basis(lhs);
  return {canonical_basis(detail::combine(form.left, x), form.dim), -sel.weight, SpaceLabel::Selection};
}

// ---------------------------------------------------------------------------
// Predicates.

struct Diagnostics {
  bool ok = true;
  std::vector<std::string> violations;

  void add(std::string msg) {
    ok = false;
    violations.push_back(std::move(msg));
  }
  explicit operator bool() const { return ok; }
};

/// No pole of f_0^{-1} within 1e-8 of Re z = (n+1)/2 - gamma - mu or Re z = (n+1)/2 - gamma.
inline Diagnostics check_E2(const ConormalSequence& seq, double gamma) {
  Diagnostics d;
  const auto [lo, hi] = weight_strip(seq.n, seq.mu, gamma);
  for (const auto& p : all_poles(seq.fs.front())) {
    for (double line : {lo, hi}) {
      if (std::abs(p.value.real() - line) < kStripTol) {
        std::ostringstream os;
        os << "E2: pole " << p.value << " on Re z = " << line;
        d.add(os.str());
      }
    }
  }
  return d;
}

/// Indicial roots of a Laplacian-type model, one entry per mode and sign.
struct IndicialRoot {
  int mode = 0;
  int sign = -1;  // +1 for q_j^+, -1 for q_j^-
  double q = 0.0;
  int mult = 1;   // dim E_j
};

struct IndicialModel {
  int n = 2;
  std::vector<IndicialRoot> roots;
};

/// n = 1, q = 0: the admissible choices inside 1 (x) E_0 + log t (x) E_0.
enum class LogPairChoice { Zero, Constants, Full };

/// Per root: a subspace of E_j as columns (in an orthonormal basis of E_j).
struct IndicialSelection {
  std::map<std::pair<int, int>, CMatrix> subspaces;  // (mode, sign) -> columns
  LogPairChoice log_pair = LogPairChoice::Zero;      // used only when n = 1

  CMatrix at(const IndicialRoot& r) const {
    auto it = subspaces.find({r.mode, r.sign});
    return it == subspaces.end() ? CMatrix(r.mult, 0) : it->second;
  }
};

namespace detail {

inline bool in_open(double x, double a, double b) { return x > a + 1e-12 && x < b - 1e-12; }

inline bool same_subspace(const CMatrix& a, const CMatrix& b) {
  const auto ra = numerical_rank(a);
  const auto rb = numerical_rank(b);
  if (ra != rb) return false;
  if (ra == 0) return true;
  CMatrix both(a.rows(), a.cols() + b.cols());
  both << a, b;
  return numerical_rank(both) == ra;
}

inline CMatrix complement_in(const CMatrix& cols, Eigen::Index dim) {
  if (cols.cols() == 0 || numerical_rank(cols) == 0) return CMatrix::Identity(dim, dim);
  return null_basis(cols.adjoint());
}

}  // namespace detail

/// Rules for a selection of the model cone Laplacian at weight gamma:
///  (1) on I_gamma and I_{-gamma}: selection at q_j^{-+} is the complement of the one at q_j^{+-};
///  (2) gamma >= 0: full space on I_gamma \ I_{-gamma};
///  (3) gamma <= 0: zero space on I_gamma \ I_{-gamma}.
inline Diagnostics check_extension_rules(const IndicialModel& model, const IndicialSelection& sel, double gamma) {
  Diagnostics d;
  const int n = model.n;
  const double a = 0.5 * (n - 3) - gamma, b = 0.5 * (n + 1) - gamma;   // I_gamma
  const double c = 0.5 * (n - 3) + gamma, e = 0.5 * (n + 1) + gamma;   // I_{-gamma}
  auto describe = [](const char* rule, const IndicialRoot& r) {
    std::ostringstream os;
    os << rule << " violated at q = " << r.q << " (mode " << r.mode << (r.sign > 0 ? ", +)" : ", -)");
    return os.str();
  };
  for (const auto& r : model.roots) {
    const bool in_g = detail::in_open(r.q, a, b);
    const bool in_mg = detail::in_open(r.q, c, e);
    if (!in_g) continue;
    const bool log_case = n == 1 && r.mode == 0;
    if (log_case) {
      if (r.sign > 0) continue;  // q_0^+ = q_0^- = 0 carries one log pair
      if (in_mg) {
        if (sel.log_pair != LogPairChoice::Constants) d.add(describe("rule 1", r));
      } else if (gamma >= 0 && sel.log_pair != LogPairChoice::Full) {
        d.add(describe("rule 2", r));
      } else if (gamma <= 0 && sel.log_pair != LogPairChoice::Zero) {
        d.add(describe("rule 3", r));
      }
      continue;
    }
    const CMatrix here = sel.at(r);
    if (in_mg) {
      IndicialRoot partner = r;
      partner.sign = -r.sign;
      const CMatrix there = sel.at(partner);
      if (!detail::same_subspace(detail::complement_in(here, r.mult), there)) d.add(describe("rule 1", r));
    } else {
      const auto rank = numerical_rank(here);
      if (gamma >= 0 && rank != r.mult) d.add(describe("rule 2", r));
      if (gamma <= 0 && rank != 0) d.add(describe("rule 3", r));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Half-axis operator A_alpha = d^2/dt^2 - alpha d/dt = t^{-2}(f_0(D) + t f_1(D)).

inline ConormalSequence half_axis_sequence(double alpha) {
  auto m = [](double x) { return CMatrix::Constant(1, 1, cplx(x, 0.0)); };
  return build_sequence({{m(0.0), m(1.0), m(1.0)}, {m(0.0), m(alpha), m(0.0)}}, 2, 0, true);
}

/// a + b t as an asymptotic function (1-dimensional cross section).
inline AsymptoticFunction half_axis_function(cplx a, cplx b) {
  AsymptoticFunction f;
  if (a != cplx(0.0)) f.push_back({CVector::Constant(1, a), 0.0, 0});
  if (b != cplx(0.0)) f.push_back({CVector::Constant(1, b), -1.0, 0});
  return f;
}

}  // namespace conecalc
