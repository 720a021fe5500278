// SPDX-License-Identifier: Apache-2.0
#pragma once

// Porous medium equation u' = Delta(u^m) + f(u, t) on the warped finite cone,
// radial (mode 0) data, with the extension carrying the constants.  Each step
// freezes a = m u^{m-1} and solves
//   (I - dt a L) (u_{k+1} - u_k) = dt (L(u_k^m) + f(u_k, t_k)).

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "cone_numerics.hpp"

namespace conecalc {

/// f(u, t, x) with x the radial coordinate.
using Forcing = std::function<double(double, double, double)>;

struct PMEConfig {
  WarpedMetricModel model{sphere_spectrum(2, 2), 0.0};
  double m = 2.0;
  double gamma = 0.2;
  double s = 0.0;
  double p = 20.0;
  double q = 20.0;
  double horizon = 0.05;
  double dt = 1e-3;
  LogGrid grid = make_grid(1e-4, 1.0, 400);
  Forcing forcing;
  RVector u0;
  bool throw_on_positivity_loss = false;
};

struct PMEState {
  double time = 0.0;
  RVector u;
  double extension_coefficient = 0.0;  // coefficient of omega * 1
  double min_u = 0.0;
  double residual = 0.0;
};

/// The strict inequalities on (p, q, s, gamma), the weight conditions and u0 > 0.
inline std::vector<std::string> validate(const PMEConfig& c) {
  std::vector<std::string> out;
  const int n = c.model.n();
  auto bad = [&out](const std::string& what) { out.push_back(what); };
  if (!(c.m > 0.0)) bad("m must be positive");
  if (!(c.p > 1.0) || !(c.q > 1.0)) bad("need 1 < p, q");
  if (!((n + 1.0) / c.p + 2.0 / c.q < 1.0)) bad("(n+1)/p + 2/q < 1 fails");
  if (!(0.5 * (n - 3) + 2.0 / c.q < c.gamma)) bad("(n-3)/2 + 2/q < gamma fails");
  if (!(c.s > -1.0 + (n + 1.0) / c.p + 2.0 / c.q)) bad("s > -1 + (n+1)/p + 2/q fails");
  for (const auto& v : pme_weight_check(c.model, c.gamma).violations) bad(v);
  if (!(c.dt > 0.0) || !(c.horizon > 0.0)) bad("dt and T must be positive");
  if (c.u0.size() != c.grid.size) {
    bad("u0 does not match the grid");
  } else if (c.u0.size() > 0 && !(c.u0.minCoeff() > 0.0)) {
    bad("u0 must be bounded below by a positive constant");
  }
  return out;
}

/// Mode-0 operator with the constants adjoined and a Neumann row at t_max.
inline ModeOperator pme_operator(const PMEConfig& c) {
  AssembleOptions opt;
  opt.frozen = false;
  opt.outer = OuterBoundary::Neumann;
  WarpedMetricModel radial = c.model;
  radial.spectrum.modes.resize(1);
  return assemble(radial, constants_selection(), c.grid, opt).modes.front();
}

namespace detail {

inline Eigen::SparseMatrix<double> step_matrix(const ModeOperator& op, const RVector& a, double dt) {
  const auto m = op.t0.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(3 * m + op.rank()));
  for (Eigen::Index i = 0; i < m; ++i) {
    trip.emplace_back(i, i, 1.0 - dt * a(i) * op.t0.diag(i));
    if (i > 0) trip.emplace_back(i, i - 1, -dt * a(i) * op.t0.sub(i));
    if (i + 1 < m) trip.emplace_back(i, i + 1, -dt * a(i) * op.t0.sup(i));
  }
  if (op.rank() > 0) {
    const RMatrix border = op.d * op.ptop;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index k = 0; k < op.rank(); ++k) {
        if (border(r, k) != 0.0) trip.emplace_back(r, k, -dt * a(r) * border(r, k));
      }
    }
  }
  Eigen::SparseMatrix<double> mat(m, m);
  mat.setFromTriplets(trip.begin(), trip.end());
  return mat;
}

}  // namespace detail

class PMESolver {
 public:
  explicit PMESolver(PMEConfig config) : c_(std::move(config)), op_(pme_operator(c_)) {}

  const ModeOperator& op() const { return op_; }
  const PMEConfig& config() const { return c_; }

  PMEState initial() const {
    PMEState st;
    st.u = c_.u0;
    st.min_u = c_.u0.minCoeff();
    st.extension_coefficient = (op_.ptop * c_.u0.head(op_.rank()))(0);
    return st;
  }

  PMEState step(const PMEState& st) const {
    const auto m = st.u.size();
    const RVector um = st.u.array().pow(c_.m).matrix();
    const RVector a = c_.m * st.u.array().pow(c_.m - 1.0).matrix();
    RVector rhs = op_.apply_differences(um);
    if (c_.forcing) {
      for (Eigen::Index i = 0; i < m; ++i) rhs(i) += c_.forcing(st.u(i), st.time, c_.grid.t[static_cast<std::size_t>(i)]);
    }
    rhs *= c_.dt;
    const auto mat = detail::step_matrix(op_, a, c_.dt);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(mat);
    if (lu.info() != Eigen::Success) fail(ErrorCode::LinearSolveFailed, "step matrix factorization failed");
    const RVector delta = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !delta.allFinite()) fail(ErrorCode::LinearSolveFailed, "step solve failed");
    PMEState next;
    next.time = st.time + c_.dt;
    next.u = st.u + delta;
    next.min_u = next.u.minCoeff();
    next.extension_coefficient = (op_.ptop * next.u.head(op_.rank()))(0);
    const double scale = std::max(rhs.norm(), 1e-300);
    next.residual = rhs.norm() == 0.0 ? (mat * delta).norm() : (mat * delta - rhs).norm() / scale;
    if (!(next.min_u > 0.0)) {
      fail(ErrorCode::PositivityLost, "min u = " + std::to_string(next.min_u) + " at t = " + std::to_string(next.time));
    }
    return next;
  }

 private:
  PMEConfig c_;
  ModeOperator op_;
};

struct PMEReport {
  std::vector<PMEState> trajectory;
  bool positivity_ok = true;
  double time_reached = 0.0;
  double min_u = 0.0;
  double max_residual = 0.0;
  int steps = 0;
};

/// Runs to the horizon, keeping every output_every-th state (and the last).
inline PMEReport solve(const PMEConfig& c, int output_every = 1) {
  const auto problems = validate(c);
  if (!problems.empty()) fail(ErrorCode::InvalidInput, problems.front());
  const PMESolver solver(c);
  PMEReport rep;
  PMEState st = solver.initial();
  rep.trajectory.push_back(st);
  rep.min_u = st.min_u;
  const int count = static_cast<int>(std::ceil(c.horizon / c.dt - 1e-9));
  for (int k = 0; k < count; ++k) {
    try {
      st = solver.step(st);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PositivityLost || c.throw_on_positivity_loss) throw;
      rep.positivity_ok = false;
      break;
    }
    ++rep.steps;
    rep.time_reached = st.time;
    rep.min_u = std::min(rep.min_u, st.min_u);
    rep.max_residual = std::max(rep.max_residual, st.residual);
    if (k + 1 == count || (output_every > 0 && (k + 1) % output_every == 0)) rep.trajectory.push_back(st);
  }
  return rep;
}

/// Discrete K^{0,gamma} norm on a grid: (sum h t^{n+1-2 gamma} |u|^2)^{1/2}.
inline double k0_norm(const RVector& u, const LogGrid& g, int n, double gamma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) acc += g.h * std::pow(g.t[static_cast<std::size_t>(i)], n + 1 - 2.0 * gamma) * u(i) * u(i);
  return std::sqrt(acc);
}

/// Smooth positive radial data compatible with both boundary rows.
inline RVector reference_data(const LogGrid& g, double base = 1.0, double amp = 0.5) {
  RVector u(g.size);
  for (int i = 0; i < g.size; ++i) u(i) = base + amp * std::cos(kPi * g.t[static_cast<std::size_t>(i)] / g.t_max);
  return u;
}

}  // namespace conecalc
