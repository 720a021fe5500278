// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-mode log-grid discretization of the (warped or frozen) cone Laplacian
//   L = t^{-2}(d_s^2 + (n-1+H(t)) d_s + lambda_j(t)),  s = log t,
// with extension functions adjoined as bordered columns.  Resolvent norms,
// Dunford integrals and dilations act mode by mode.

#include <exception>
#include <functional>
#include <map>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "warped_laplacian.hpp"

namespace conecalc {

/// Ordered parallel map; jobs <= 0 uses the hardware concurrency.
template <class F>
auto parallel_map(std::size_t count, int jobs, F&& fn) -> std::vector<decltype(fn(std::size_t{0}))> {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out(count);
  std::vector<std::exception_ptr> errors(count);
  unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  auto run = [&](std::size_t first) {
    for (std::size_t i = first; i < count; i += workers) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct LogGrid {
  double t_min = 1e-4;
  double t_max = 1.0;
  int size = 400;
  std::vector<double> t;
  double h = 0.0;  // log of the ratio

  double ratio() const { return std::exp(h); }
};

inline LogGrid make_grid(double t_min, double t_max, int size) {
  if (!(t_min > 0.0) || !(t_max > t_min) || size < 8) fail(ErrorCode::InvalidInput, "grid needs 0 < t_min < t_max and at least 8 points");
  LogGrid g;
  g.t_min = t_min;
  g.t_max = t_max;
  g.size = size;
  g.h = std::log(t_max / t_min) / (size - 1);
  g.t.resize(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) g.t[static_cast<std::size_t>(i)] = t_min * std::exp(i * g.h);
  return g;
}

/// omega(t) t^{-exponent} log^{logpow} t on one mode.
struct ExtensionTerm {
  double exponent = 0.0;
  int logpow = 0;
};

/// Extension functions per mode index (modes not listed get none).
struct ExtensionSelection {
  std::map<int, std::vector<ExtensionTerm>> per_mode;
};

/// The extension underline E_0 = 1 (x) E_0: constants on mode 0.
inline ExtensionSelection constants_selection() {
  ExtensionSelection s;
  s.per_mode[0] = {{0.0, 0}};
  return s;
}

enum class OuterBoundary { Dirichlet, Neumann };

struct AssembleOptions {
  bool frozen = true;
  OuterBoundary outer = OuterBoundary::Dirichlet;
  bool check_consistency = true;
  double consistency_tol = 1e-3;
};

struct Tridiagonal {
  RVector sub, diag, sup;  // row i: sub(i) u_{i-1} + diag(i) u_i + sup(i) u_{i+1}

  Eigen::Index size() const { return diag.size(); }

  template <class V>
  V apply(const V& x) const {
    const auto m = size();
    V y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      auto v = diag(i) * x(i);
      if (i > 0) v += sub(i) * x(i - 1);
      if (i + 1 < m) v += sup(i) * x(i + 1);
      y(i) = v;
    }
    return y;
  }

  RMatrix dense() const {
    const auto m = size();
    RMatrix a = RMatrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      a(i, i) = diag(i);
      if (i > 0) a(i, i - 1) = sub(i);
      if (i + 1 < m) a(i, i + 1) = sup(i);
    }
    return a;
  }
};

/// Grid Laplacian on one mode: L = T0 + D Ptop [u_0..u_{K-1}].
struct ModeOperator {
  int mode = 0;
  int mult = 1;
  double lambda = 0.0;
  Tridiagonal t0;
  RMatrix d;     // M x K, the ghost contribution of the extension columns
  RMatrix ptop;  // K x K, coefficients of the extension part from the first K values
  RVector ghost;  // K, extension functions at t_min / ratio
  std::vector<ExtensionTerm> extension;
  // stencil data for the difference form
  RVector weight, drift, potential;  // t^{-2}, n-1+H, lambda_j(t)
  double h = 0.0;
  bool neumann = false;

  Eigen::Index rank() const { return d.cols(); }

  RMatrix dense() const {
    RMatrix a = t0.dense();
    if (rank() > 0) a.leftCols(rank()) += d * ptop;
    return a;
  }

  template <class V>
  V apply(const V& x) const {
    V y = t0.apply(x);
    if (rank() > 0) y += (d * (ptop * x.head(rank()))).template cast<typename V::Scalar>();
    return y;
  }

  /// Same operator written with differences, so constants on mode 0 map to exact zeros.
  RVector apply_differences(const RVector& x) const {
    const auto m = x.size();
    const double lo = rank() > 0 ? ghost.dot(ptop * x.head(rank())) : 0.0;
    const double hi = neumann ? x(m - 2) : 0.0;
    RVector y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double left = i > 0 ? x(i - 1) : lo;
      const double right = i + 1 < m ? x(i + 1) : hi;
      y(i) = weight(i) * (((right - x(i)) - (x(i) - left)) / (h * h) + drift(i) * (right - left) / (2.0 * h) + potential(i) * x(i));
    }
    return y;
  }
};

/// op = scale * L + shift.
struct DiscretizedOperator {
  LogGrid grid;
  int n = 2;
  bool frozen = true;
  OuterBoundary outer = OuterBoundary::Dirichlet;
  double scale = 1.0;
  double shift = 0.0;
  std::vector<ModeOperator> modes;

  RMatrix dense(std::size_t k) const {
    const auto m = grid.size;
    return scale * modes.at(k).dense() + shift * RMatrix::Identity(m, m);
  }
};

/// -L + c, the sectorial operator probed by sweeps and the Dunford calculus.
inline DiscretizedOperator negated(DiscretizedOperator op, double c = 0.0) {
  op.scale = -op.scale;
  op.shift = -op.shift + c;
  return op;
}

namespace detail {

inline double ext_value(const ExtensionTerm& e, double t, const Cutoff& omega) {
  return omega(t) * std::pow(t, -e.exponent) * std::pow(std::log(t), e.logpow);
}

struct StencilRow {
  double lower, mid, upper;
};

inline StencilRow stencil(const WarpedMetricModel& model, int mode, double t, double h, bool frozen) {
  const int n = model.n();
  const double b = (n - 1.0) + (frozen ? 0.0 : model.h_at(t));
  const double c = frozen ? model.spectrum.modes[static_cast<std::size_t>(mode)].lambda : model.lambda_at(mode, t);
  const double w = 1.0 / (t * t);
  return {w * (1.0 / (h * h) - b / (2.0 * h)), w * (-2.0 / (h * h) + c), w * (1.0 / (h * h) + b / (2.0 * h))};
}

/// max defect of the interior stencil on t^2 and t log t, relative to the size of its terms.
inline double consistency_defect(const WarpedMetricModel& model, int mode, const LogGrid& g, bool frozen) {
  const int n = model.n();
  double worst = 0.0;
  for (int probe = 0; probe < 2; ++probe) {
    auto u = [probe](double t) { return probe == 0 ? t * t : t * std::log(t); };
    double err = 0.0, scale = 0.0;
    for (int i = 1; i + 1 < g.size; ++i) {
      const double t = g.t[static_cast<std::size_t>(i)];
      const double s = std::log(t);
      const auto row = stencil(model, mode, t, g.h, frozen);
      const double disc = row.lower * u(g.t[static_cast<std::size_t>(i - 1)]) + row.mid * u(t) + row.upper * u(g.t[static_cast<std::size_t>(i + 1)]);
      const double b = (n - 1.0) + (frozen ? 0.0 : model.h_at(t));
      const double c = frozen ? model.spectrum.modes[static_cast<std::size_t>(mode)].lambda : model.lambda_at(mode, t);
      double d1, d2;  // d/ds and d^2/ds^2
      if (probe == 0) {
        d1 = 2.0 * t * t;
        d2 = 4.0 * t * t;
      } else {
        d1 = t * (s + 1.0);
        d2 = t * (s + 2.0);
      }
      const double exact = (d2 + b * d1 + c * u(t)) / (t * t);
      err = std::max(err, std::abs(disc - exact));
      scale = std::max(scale, (std::abs(d2) + std::abs(b * d1) + std::abs(c * u(t))) / (t * t));
    }
    worst = std::max(worst, err / std::max(scale, 1e-300));
  }
  return worst;
}

}  // namespace detail

inline DiscretizedOperator assemble(const WarpedMetricModel& model, const ExtensionSelection& sel, const LogGrid& g,
                                    const AssembleOptions& opt = {}) {
  validate_spectrum(model.spectrum);
  DiscretizedOperator op;
  op.grid = g;
  op.n = model.n();
  op.frozen = opt.frozen;
  op.outer = opt.outer;
  const Cutoff omega;
  const auto m = g.size;
  for (int j = 0; j < model.spectrum.truncation(); ++j) {
    if (opt.check_consistency) {
      const double defect = detail::consistency_defect(model, j, g, opt.frozen);
      if (defect > opt.consistency_tol) fail(ErrorCode::GridTooCoarse, "stencil consistency defect " + std::to_string(defect));
    }
    ModeOperator mo;
    mo.mode = j;
    mo.mult = model.spectrum.modes[static_cast<std::size_t>(j)].mult;
    mo.lambda = model.spectrum.modes[static_cast<std::size_t>(j)].lambda;
    mo.t0.sub = RVector::Zero(m);
    mo.t0.diag = RVector::Zero(m);
    mo.t0.sup = RVector::Zero(m);
    double lower0 = 0.0;
    mo.h = g.h;
    mo.neumann = opt.outer == OuterBoundary::Neumann;
    mo.weight = RVector(m);
    mo.drift = RVector(m);
    mo.potential = RVector(m);
    for (int i = 0; i < m; ++i) {
      const double t = g.t[static_cast<std::size_t>(i)];
      mo.weight(i) = 1.0 / (t * t);
      mo.drift(i) = (op.n - 1.0) + (opt.frozen ? 0.0 : model.h_at(t));
      mo.potential(i) = opt.frozen ? mo.lambda : model.lambda_at(j, t);
      const auto row = detail::stencil(model, j, t, g.h, opt.frozen);
      mo.t0.diag(i) = row.mid;
      if (i > 0) mo.t0.sub(i) = row.lower;
      if (i == 0) lower0 = row.lower;
      if (i + 1 < m) {
        mo.t0.sup(i) = row.upper;
      } else if (opt.outer == OuterBoundary::Neumann) {
        mo.t0.sub(i) += row.upper;  // ghost u_M = u_{M-2}
      }
    }
    auto it = sel.per_mode.find(j);
    if (it != sel.per_mode.end() && !it->second.empty()) {
      mo.extension = it->second;
      const auto k = static_cast<Eigen::Index>(it->second.size());
      RMatrix top(k, k);
      RMatrix d = RMatrix::Zero(m, k);
      mo.ghost = RVector(k);
      const double ghost_t = g.t.front() / g.ratio();
      if (g.t[static_cast<std::size_t>(k - 1)] >= omega.lo()) fail(ErrorCode::InvalidInput, "extension columns need grid points where omega = 1");
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto& e = it->second[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < k; ++r) top(r, c) = detail::ext_value(e, g.t[static_cast<std::size_t>(r)], omega);
        mo.ghost(c) = detail::ext_value(e, ghost_t, omega);
        d(0, c) = lower0 * mo.ghost(c);
      }
      Eigen::FullPivLU<RMatrix> lu(top);
      if (!lu.isInvertible()) fail(ErrorCode::InvalidInput, "extension functions are not resolved by the first grid points");
      mo.d = d;
      mo.ptop = lu.inverse();
    } else {
      mo.d = RMatrix(m, 0);
      mo.ptop = RMatrix(0, 0);
    }
    op.modes.push_back(std::move(mo));
  }
  return op;
}

// ---------------------------------------------------------------------------
// Resolvents.

/// LU of a complex tridiagonal matrix without pivoting.
class TridiagonalLU {
 public:
  TridiagonalLU() = default;
  TridiagonalLU(const CVector& sub, const CVector& diag, const CVector& sup) : sub_(sub), sup_(sup) {
    const auto m = diag.size();
    piv_.resize(m);
    piv_(0) = diag(0);
    for (Eigen::Index i = 1; i < m; ++i) {
      if (std::abs(piv_(i - 1)) == 0.0) fail(ErrorCode::SpectrumHit, "zero pivot in tridiagonal solve");
      piv_(i) = diag(i) - sub(i) * sup(i - 1) / piv_(i - 1);
    }
    if (std::abs(piv_(m - 1)) == 0.0) fail(ErrorCode::SpectrumHit, "zero pivot in tridiagonal solve");
  }

  CVector solve(const CVector& b) const {
    const auto m = b.size();
    CVector y(m);
    y(0) = b(0);
    for (Eigen::Index i = 1; i < m; ++i) y(i) = b(i) - sub_(i) / piv_(i - 1) * y(i - 1);
    CVector x(m);
    x(m - 1) = y(m - 1) / piv_(m - 1);
    for (Eigen::Index i = m - 2; i >= 0; --i) x(i) = (y(i) - sup_(i) * x(i + 1)) / piv_(i);
    return x;
  }

 private:
  CVector sub_, sup_, piv_;
};

/// (lambda - op)^{-1} on one mode, by Woodbury around the tridiagonal part.
class ModeResolvent {
 public:
  ModeResolvent(const DiscretizedOperator& op, std::size_t k, cplx lambda) {
    const auto& mo = op.modes.at(k);
    const auto m = mo.t0.size();
    const CVector sub = -op.scale * mo.t0.sub.cast<cplx>();
    const CVector sup = -op.scale * mo.t0.sup.cast<cplx>();
    const CVector diag = (lambda - op.shift) * CVector::Ones(m) - op.scale * mo.t0.diag.cast<cplx>();
    lu_ = TridiagonalLU(sub, diag, sup);
    // adjoint: transpose and conjugate
    CVector asub(m), asup(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      asub(i) = i > 0 ? std::conj(sup(i - 1)) : cplx(0.0);
      asup(i) = i + 1 < m ? std::conj(sub(i + 1)) : cplx(0.0);
    }
    lu_adj_ = TridiagonalLU(asub, diag.conjugate(), asup);
    rank_ = mo.rank();
    if (rank_ > 0) {
      u_ = (op.scale * mo.d).cast<cplx>();
      v_ = mo.ptop.cast<cplx>();
      z_ = CMatrix(m, rank_);
      for (Eigen::Index c = 0; c < rank_; ++c) z_.col(c) = lu_.solve(u_.col(c));
      cap_ = Eigen::PartialPivLU<CMatrix>(CMatrix::Identity(rank_, rank_) - v_ * z_.topRows(rank_));
      // adjoint correction: (M - U V)^* = M^* - V^* U^*
      za_ = CMatrix(m, rank_);
      CMatrix vstar = CMatrix::Zero(m, rank_);
      vstar.topRows(rank_) = v_.adjoint();
      for (Eigen::Index c = 0; c < rank_; ++c) za_.col(c) = lu_adj_.solve(vstar.col(c));
      cap_adj_ = Eigen::PartialPivLU<CMatrix>(CMatrix::Identity(rank_, rank_) - u_.adjoint() * za_);
    }
  }

  CVector solve(const CVector& x) const {
    CVector y = lu_.solve(x);
    if (rank_ > 0) y += z_ * cap_.solve(v_ * y.head(rank_));
    return y;
  }

  CVector solve_adjoint(const CVector& x) const {
    CVector y = lu_adj_.solve(x);
    if (rank_ > 0) y += za_ * cap_adj_.solve(u_.adjoint() * y);
    return y;
  }

 private:
  TridiagonalLU lu_, lu_adj_;
  Eigen::Index rank_ = 0;
  CMatrix u_, v_, z_, za_;
  Eigen::PartialPivLU<CMatrix> cap_, cap_adj_;
};

/// Full inverse column by column.
inline CMatrix resolvent_matrix(const DiscretizedOperator& op, std::size_t k, cplx lambda) {
  const ModeResolvent res(op, k, lambda);
  const auto m = op.grid.size;
  CMatrix out(m, m);
  for (Eigen::Index c = 0; c < m; ++c) out.col(c) = res.solve(CVector::Unit(m, c));
  return out;
}

// ---------------------------------------------------------------------------
// Weighted norms.

struct WeightedNormSpec {
  int s = 0;  // log-derivative order 0, 1 or 2
  double gamma = 0.0;
  double p = 2.0;
};

/// The metric ||u|| = ||C u||_2 with C upper triangular (diagonal for s = 0).
class NormMetric {
 public:
  NormMetric(const LogGrid& g, int n, const WeightedNormSpec& spec) {
    if (spec.s < 0 || spec.s > 2) fail(ErrorCode::InvalidInput, "norm order s must be 0, 1 or 2");
    if (spec.p != 2.0) fail(ErrorCode::InvalidInput, "only p = 2 norms are discretized");
    const auto m = g.size;
    w_ = RVector(m);
    for (int i = 0; i < m; ++i) w_(i) = std::sqrt(g.h) * std::pow(g.t[static_cast<std::size_t>(i)], 0.5 * (n + 1) - spec.gamma);
    s_ = spec.s;
    if (s_ > 0) {
      // Gram matrix of [W; W D1; W D2] with D_k centered differences in s
      RMatrix d1 = RMatrix::Zero(m, m), d2 = RMatrix::Zero(m, m);
      for (int i = 1; i + 1 < m; ++i) {
        d1(i, i - 1) = -0.5 / g.h;
        d1(i, i + 1) = 0.5 / g.h;
        d2(i, i - 1) = 1.0 / (g.h * g.h);
        d2(i, i) = -2.0 / (g.h * g.h);
        d2(i, i + 1) = 1.0 / (g.h * g.h);
      }
      d1(0, 0) = -1.0 / g.h;
      d1(0, 1) = 1.0 / g.h;
      d1(m - 1, m - 2) = -1.0 / g.h;
      d1(m - 1, m - 1) = 1.0 / g.h;
      const RMatrix w = w_.asDiagonal();
      RMatrix gram = w * w;
      const RMatrix a = w * d1;
      gram += a.transpose() * a;
      if (s_ > 1) {
        const RMatrix b = w * d2;
        gram += b.transpose() * b;
      }
      Eigen::LLT<RMatrix> llt(gram);
      c_ = RMatrix(llt.matrixU()).cast<cplx>();
      ct_ = c_.transpose();
    }
  }

  CVector apply(const CVector& x) const { return s_ == 0 ? CVector(w_.cast<cplx>().cwiseProduct(x)) : CVector(c_ * x); }
  CVector apply_inverse(const CVector& x) const {
    if (s_ == 0) return x.cwiseQuotient(w_.cast<cplx>());
    return c_.triangularView<Eigen::Upper>().solve(x);
  }
  CVector apply_adjoint(const CVector& x) const { return s_ == 0 ? apply(x) : CVector(ct_ * x); }
  CVector apply_inverse_adjoint(const CVector& x) const {
    if (s_ == 0) return apply_inverse(x);
    return ct_.triangularView<Eigen::Lower>().solve(x);
  }

  /// ||C A C^{-1}||_2 for a dense A.
  CMatrix conjugate(const CMatrix& a) const {
    if (s_ == 0) return w_.cast<cplx>().asDiagonal() * a * w_.cwiseInverse().cast<cplx>().asDiagonal();
    return c_ * a * c_.triangularView<Eigen::Upper>().solve(CMatrix::Identity(a.rows(), a.cols()));
  }

 private:
  int s_ = 0;
  RVector w_;
  CMatrix c_, ct_;
};

/// Largest singular value by power iteration on Q^* Q.
inline double operator_norm(const std::function<CVector(const CVector&)>& q, const std::function<CVector(const CVector&)>& q_adj,
                            Eigen::Index size, double tol = 1e-10, int max_iter = 1000) {
  CVector x(size);
  for (Eigen::Index i = 0; i < size; ++i) x(i) = cplx(1.0 + 0.5 * std::sin(1.3 * i), 0.25 * std::cos(0.7 * i));
  x.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const CVector y = q(x);
    const double next = y.norm();
    CVector z = q_adj(y);
    const double zn = z.norm();
    if (zn == 0.0) return 0.0;
    x = z / zn;
    if (std::abs(next - sigma) <= tol * next) return next;
    sigma = next;
  }
  return sigma;
}

inline double spectral_norm(const CMatrix& a, double tol = 1e-10) {
  return operator_norm([&a](const CVector& x) { return CVector(a * x); }, [&a](const CVector& y) { return CVector(a.adjoint() * y); },
                       a.cols(), tol);
}

/// Weighted norm of (lambda - op)^{-1} on one mode.
inline double resolvent_norm(const DiscretizedOperator& op, std::size_t k, cplx lambda, const NormMetric& metric) {
  const ModeResolvent res(op, k, lambda);
  return operator_norm([&](const CVector& x) { return metric.apply(res.solve(metric.apply_inverse(x))); },
                       [&](const CVector& y) { return metric.apply_inverse_adjoint(res.solve_adjoint(metric.apply_adjoint(y))); },
                       op.grid.size);
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SectorSpec {
  double theta = kPi / 4;        // Lambda(theta) = {theta <= arg <= 2 pi - theta}
  std::vector<double> rays{kPi};  // arg values
  std::vector<double> radii;
};

inline std::vector<double> geometric_radii(double lo, double hi, int per_decade) {
  std::vector<double> out;
  if (!(lo > 0.0) || hi < lo || per_decade < 1) return out;
  const int count = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= count; ++i) out.push_back(lo * std::pow(hi / lo, count == 0 ? 0.0 : static_cast<double>(i) / count));
  return out;
}

struct SweepRow {
  cplx lambda;
  double resolvent_norm = 0.0;  // max over modes of ||(lambda - op)^{-1}||
  double norm = 0.0;            // |lambda| * resolvent_norm
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double sup_norm = 0.0;
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ray_exponents;
  double min_real_eigenvalue = std::numeric_limits<double>::quiet_NaN();
};

/// Eigenvalues of every mode block.
inline std::vector<CVector> mode_spectra(const DiscretizedOperator& op, int jobs = 1) {
  return parallel_map(op.modes.size(), jobs, [&](std::size_t k) {
    Eigen::EigenSolver<RMatrix> es(op.dense(k), false);
    return CVector(es.eigenvalues());
  });
}

namespace detail {

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline SweepResult resolvent_sweep(const DiscretizedOperator& op, const SectorSpec& sector, const WeightedNormSpec& norm, int jobs = 1,
                                   double hit_margin = 1e-6) {
  SweepResult out;
  if (sector.radii.empty() || sector.rays.empty()) return out;
  const NormMetric metric(op.grid, op.n, norm);
  const auto spectra = mode_spectra(op, jobs);
  out.min_real_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& ev : spectra) {
    for (auto v : ev) out.min_real_eigenvalue = std::min(out.min_real_eigenvalue, v.real());
  }
  std::vector<cplx> lambdas;
  for (double ray : sector.rays) {
    for (double r : sector.radii) lambdas.push_back(std::polar(r, ray));
  }
  for (auto l : lambdas) {
    for (const auto& ev : spectra) {
      for (auto v : ev) {
        if (std::abs(l - v) < hit_margin * std::max(1.0, std::abs(l))) fail(ErrorCode::SpectrumHit, "sweep point on the numerical spectrum");
      }
    }
  }
  out.rows = parallel_map(lambdas.size(), jobs, [&](std::size_t i) {
    double best = 0.0;
    for (std::size_t k = 0; k < op.modes.size(); ++k) best = std::max(best, resolvent_norm(op, k, lambdas[i], metric));
    return SweepRow{lambdas[i], best, std::abs(lambdas[i]) * best};
  });
  for (const auto& row : out.rows) out.sup_norm = std::max(out.sup_norm, row.norm);
  const double rmax = *std::max_element(sector.radii.begin(), sector.radii.end());
  std::vector<double> all_x, all_y;
  for (std::size_t ray = 0; ray < sector.rays.size(); ++ray) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < sector.radii.size(); ++i) {
      const auto& row = out.rows[ray * sector.radii.size() + i];
      if (sector.radii[i] >= rmax / 10.0 * (1 - 1e-12)) {
        x.push_back(std::log(sector.radii[i]));
        y.push_back(std::log(row.resolvent_norm));
      }
    }
    out.ray_exponents.push_back(detail::slope(x, y));
    all_x.insert(all_x.end(), x.begin(), x.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
  }
  out.fitted_exponent = detail::slope(all_x, all_y);
  return out;
}

// ---------------------------------------------------------------------------
// Dunford calculus.

using ScalarFunction = std::function<cplx(cplx)>;

/// Boundary of the sector around the spectrum: r e^{-i theta} outwards, r e^{i theta} back.
struct DunfordContour {
  double theta = kPi / 2;
  double r_min = 1e-10;
  double r_max = 1e16;
  double step = 0.3;  // trapezoid step in log r
  double tail_tol = 1e-6;
  bool real_symmetric = true;  // f(conj z) = conj f(z): one ray suffices
};

namespace detail {

inline std::vector<double> contour_logs(const DunfordContour& c) {
  std::vector<double> x;
  const double a = std::log(c.r_min), b = std::log(c.r_max);
  const int count = static_cast<int>(std::ceil((b - a) / c.step));
  for (int i = 0; i <= count; ++i) x.push_back(a + (b - a) * i / count);
  return x;
}

}  // namespace detail

/// f(op) on one mode for several f at once.
inline std::vector<CMatrix> dunford_apply(const DiscretizedOperator& op, std::size_t k, const std::vector<ScalarFunction>& fs,
                                          const DunfordContour& c = {}) {
  const auto m = op.grid.size;
  const auto xs = detail::contour_logs(c);
  const double dx = xs.size() > 1 ? xs[1] - xs[0] : 0.0;
  std::vector<CMatrix> lower(fs.size(), CMatrix::Zero(m, m)), upper(fs.size(), CMatrix::Zero(m, m));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = (i == 0 || i + 1 == xs.size()) ? 0.5 * dx : dx;
    for (int side = 0; side < (c.real_symmetric ? 1 : 2); ++side) {
      const cplx lambda = std::polar(std::exp(xs[i]), side == 0 ? -c.theta : c.theta);
      const CMatrix r = resolvent_matrix(op, k, lambda);
      for (std::size_t f = 0; f < fs.size(); ++f) {
        const cplx coeff = fs[f](lambda) * lambda * w;  // d lambda = lambda dx
        if (coeff != cplx(0.0)) (side == 0 ? lower : upper)[f] += coeff * r;
      }
    }
  }
  std::vector<CMatrix> out;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    if (c.real_symmetric) {
      // (1 / 2 pi i)(I - conj(I)) = Im(I) / pi
      out.push_back(CMatrix(lower[f].imag().cast<cplx>() / kPi));
    } else {
      out.push_back((lower[f] - upper[f]) / cplx(0.0, 2.0 * kPi));
    }
  }
  return out;
}

inline CMatrix dunford_apply(const DiscretizedOperator& op, std::size_t k, const ScalarFunction& f, const DunfordContour& c = {}) {
  return dunford_apply(op, k, std::vector<ScalarFunction>{f}, c).front();
}

/// a/(a+z), a z/(a+z)^2, a^2 z/(a+z)^3, a(z-a)/(a+z)^2 for a in {0.1, 1, 10, 100, 1000}.
inline std::vector<ScalarFunction> standard_family() {
  std::vector<ScalarFunction> out;
  for (double a : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
    out.emplace_back([a](cplx z) { return a / (a + z); });
    out.emplace_back([a](cplx z) { return a * z / ((a + z) * (a + z)); });
    out.emplace_back([a](cplx z) { return a * a * z / ((a + z) * (a + z) * (a + z)); });
    out.emplace_back([a](cplx z) { return a * (z - a) / ((a + z) * (a + z)); });
  }
  return out;
}

struct HinftyReport {
  double c_hinfty = 0.0;  // max ||f(op)|| / ||f||_inf
  std::vector<double> ratios;
  std::vector<double> op_norms;
  std::vector<double> sup_norms;
  std::vector<double> tails;
};

/// sup |f| over both contour rays (maximum modulus on the sector).
inline double sup_on_contour(const ScalarFunction& f, const DunfordContour& c) {
  double best = std::abs(f(0.0));
  for (double x : detail::contour_logs(c)) {
    for (double sgn : {-1.0, 1.0}) best = std::max(best, std::abs(f(std::polar(std::exp(x), sgn * c.theta))));
  }
  return best;
}

inline HinftyReport hinfty_probe(const DiscretizedOperator& op, const std::vector<ScalarFunction>& family, const WeightedNormSpec& norm,
                                 const DunfordContour& c = {}, int jobs = 1) {
  const NormMetric metric(op.grid, op.n, norm);
  HinftyReport rep;
  rep.op_norms.assign(family.size(), 0.0);
  rep.tails.assign(family.size(), 0.0);
  for (const auto& f : family) rep.sup_norms.push_back(sup_on_contour(f, c));

  const auto per_mode = parallel_map(op.modes.size(), jobs, [&](std::size_t k) {
    const auto mats = dunford_apply(op, k, family, c);
    std::vector<double> norms;
    for (const auto& a : mats) norms.push_back(spectral_norm(metric.conjugate(a), 1e-9));
    // truncation tails: ||lambda R|| bounds beyond r_max and below r_min
    const double c_hi = c.r_max * resolvent_norm(op, k, std::polar(c.r_max, -c.theta), metric);
    const double r_lo = resolvent_norm(op, k, std::polar(c.r_min, -c.theta), metric);
    std::vector<double> tails;
    for (const auto& f : family) {
      const double hi = c_hi * std::abs(f(std::polar(c.r_max, -c.theta)));
      const double lo = c.r_min * r_lo * std::abs(f(std::polar(c.r_min, -c.theta)));
      tails.push_back((hi + lo) / kPi);
    }
    return std::make_pair(norms, tails);
  });
  for (const auto& [norms, tails] : per_mode) {
    for (std::size_t f = 0; f < family.size(); ++f) {
      rep.op_norms[f] = std::max(rep.op_norms[f], norms[f]);
      rep.tails[f] = std::max(rep.tails[f], tails[f]);
    }
  }
  for (std::size_t f = 0; f < family.size(); ++f) {
    const double sup = rep.sup_norms[f];
    if (sup == 0.0) {
      rep.ratios.push_back(0.0);
      continue;
    }
    if (rep.tails[f] / sup > c.tail_tol) fail(ErrorCode::ContourNotAbsorbed, "Dunford contour truncation tail too large");
    rep.ratios.push_back(rep.op_norms[f] / sup);
    rep.c_hinfty = std::max(rep.c_hinfty, rep.ratios.back());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Dilations kappa_s u(t) = s^{-(n+1)/2} u(t/s) with s = ratio^k.

inline CVector dilation(const CVector& u, int k, int n, const LogGrid& g) {
  if (std::abs(k) >= g.size / 4) fail(ErrorCode::InvalidInput, "dilation shift must satisfy |k| < M/4");
  const auto m = u.size();
  CVector out = CVector::Zero(m);
  const double factor = std::exp(-k * g.h * 0.5 * (n + 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = i - k;
    if (src >= 0 && src < m) out(i) = factor * u(src);
  }
  return out;
}

/// Discrete K^{0,0} norm: (sum h t_i^{n+1} |u_i|^2)^{1/2}.
inline double k00_norm(const CVector& u, int n, const LogGrid& g) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += g.h * std::pow(g.t[static_cast<std::size_t>(i)], n + 1) * std::norm(u(i));
  return std::sqrt(acc);
}

/// max over interior nodes of |A kappa u - s^{-2} kappa A u| / max |kappa A u|, frozen operator.
inline double homogeneity_defect(const DiscretizedOperator& op, std::size_t mode, const CVector& u, int k) {
  const auto& mo = op.modes.at(mode);
  const auto& g = op.grid;
  const CVector lhs = mo.apply(dilation(u, k, op.n, g));
  const CVector rhs = std::exp(-2.0 * k * g.h) * dilation(mo.apply(u), k, op.n, g);
  const int margin = std::abs(k) + 2;
  double err = 0.0, scale = 0.0;
  for (int i = margin; i < g.size - margin; ++i) {
    err = std::max(err, std::abs(lhs(i) - rhs(i)));
    scale = std::max(scale, std::abs(rhs(i)));
  }
  return scale > 0.0 ? err / scale : err;
}

}  // namespace conecalc
