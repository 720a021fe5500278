// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, with the failing checks
// listed underneath.  Exit status is 0 only if every selected criterion passes.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "conecalc/pme_solver.hpp"

using namespace conecalc;

namespace {

struct Outcome {
  std::vector<std::string> failed;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<cplx> sample_points(int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.2, 2.0);
  std::vector<cplx> out;
  for (int i = 0; i < count; ++i) out.emplace_back(re(rng), im(rng));
  return out;
}

AsymptoticSpace span_of(std::vector<AsymptoticFunction> fs) { return {std::move(fs), 0.0, SpaceLabel::Selection}; }

// ---------------------------------------------------------------------------

void half_axis_suite(Outcome& out) {
  auto by_hand = [](cplx a, cplx b, cplx c, cplx d, double alpha) {
    return a * std::conj(d) - b * std::conj(c) + alpha * a * std::conj(c);
  };
  const std::vector<std::array<cplx, 4>> cases{{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {1.0, -2.0, 0.5, 3.0}};
  for (double alpha : {0.0, 0.5, -2.0}) {
    const std::string tag = " (alpha = " + fmt(alpha) + ")";
    const auto seq = half_axis_sequence(alpha);
    const auto corr = build_correspondence(seq, 0.0);
    out.check(same_span(corr.e_basis(), {half_axis_function(1.0, 0.0), half_axis_function(0.0, 1.0)}, 1), "E = span{1, t}" + tag);
    bool e0 = false;
    for (const auto& p : corr.poles) {
      if (std::abs(p.sigma) < 1e-9) e0 = same_span(p.e.basis, {half_axis_function(1.0, alpha)}, 1);
    }
    out.check(e0, "E_0 = span{1 + alpha t}" + tag);
    for (auto [a, b] : {std::pair<double, double>{1.0, 0.0}, {2.0, -1.0}, {0.0, 1.0}, {-0.3, 4.0}}) {
      const auto img = theta_on_selection(corr, span_of({half_axis_function(a, b)}), Direction::Forward);
      out.check(same_span(img.basis, {half_axis_function(a, b - a * alpha)}, 1), "Theta(span{a + bt})" + tag);
    }
    double closed = 0.0, quad = 0.0;
    for (const auto& [a, b, c, d] : cases) {
      const cplx want = by_hand(a, b, c, d, alpha);
      closed = std::max(closed, std::abs(pairing_closed_form(half_axis_function(a, b), half_axis_function(c, d), seq) - want));
      quad = std::max(quad, std::abs(pairing_quadrature(half_axis_function(a, b), half_axis_function(c, d), seq).value - want));
    }
    out.check(closed < 1e-10, "closed-form pairing error " + fmt(closed) + tag);
    out.check(quad < 1e-5, "quadrature pairing error " + fmt(quad) + tag);

    const auto e0_sel = span_of({half_axis_function(1.0, alpha)});
    const auto perp = orthogonal_complement(e0_sel, maximal_pairing(seq, 0.0));
    const auto adj_model = theta_on_selection(build_correspondence(formal_adjoint(seq), 0.0), perp, Direction::Forward);
    const auto model = theta_on_selection(corr, e0_sel, Direction::Forward);
    const auto model_adj = orthogonal_complement(model, maximal_pairing(half_axis_sequence(0.0), 0.0));
    const bool mismatch = !same_span(adj_model.basis, model_adj.basis, 1);
    out.check(mismatch == (alpha != 0.0), "complement mismatch iff alpha != 0" + tag);
  }
}

void recursion_identity(Outcome& out) {
  const auto pts = sample_points(20, 20);
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto seq = half_axis_sequence(alpha);
    const double d = verify_identity(seq, run_recursion(seq, 2), pts);
    out.check(d < 1e-10, "half-axis alpha = " + fmt(alpha) + " defect " + fmt(d));
  }
  const auto lap = conormal_of_laplacian({sphere_spectrum(2, 3), 0.3});
  const double d = verify_identity(lap, run_recursion(lap, 2), pts);
  out.check(d < 1e-10, "sphere:2 warp 0.3 defect " + fmt(d));
  out.note("max defect (sphere:2) " + fmt(d));
}

void laplacian_poles(Outcome& out) {
  const std::vector<CrossSectionSpectrum> spectra{circle_spectrum(0.5, 3), circle_spectrum(1.0, 3), sphere_spectrum(2, 3), sphere_spectrum(3, 3)};
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  double vieta = 0.0, pf_err = 0.0;
  for (const auto& spec : spectra) {
    const int n = spec.n;
    const auto q = q_poles(spec);
    for (const auto& m : q.modes) {
      vieta = std::max(vieta, std::abs(m.q_plus + m.q_minus - (n - 1.0)));
      vieta = std::max(vieta, std::abs(m.q_plus * m.q_minus - m.lambda) / std::max(1.0, std::abs(m.lambda)));
    }
    const auto f0 = conormal_of_laplacian({spec, 0.0}).fs.front();
    const auto poles = all_poles(f0);
    std::vector<LocalLaurentData> laurent;
    for (const auto& p : poles) laurent.push_back(local_laurent(f0, p.value));
    for (int s = 0; s < 50; ++s) {
      const cplx z(u(rng), u(rng));
      const CMatrix direct = Eigen::PartialPivLU<CMatrix>(f0(z)).inverse();
      CMatrix pf = CMatrix::Zero(direct.rows(), direct.cols());
      for (const auto& l : laurent) {
        for (int k = 1; k <= l.order; ++k) pf += l.coefficient(k) * std::pow(z - l.pole, -k);
      }
      pf_err = std::max(pf_err, (direct - pf).norm() / direct.norm());
    }
    int order_at_zero = 0;
    for (const auto& l : laurent) {
      if (std::abs(l.pole) < 1e-9) order_at_zero = l.order;
    }
    out.check((order_at_zero == 2) == (n == 1), "double pole at 0 iff n = 1 (" + spec.source + ")");
  }
  out.check(vieta < 1e-12, "Vieta error " + fmt(vieta));
  out.check(pf_err < 1e-10, "partial fractions error " + fmt(pf_err));
  out.note("Vieta " + fmt(vieta) + ", partial fractions " + fmt(pf_err));
}

/// c in the E_0 element 1 * log t + c t on the given component.
double log_partner(const AsymptoticSpace& e, Eigen::Index comp) {
  for (const auto& f : e.basis) {
    cplx log_coeff = 0.0, t_coeff = 0.0;
    for (const auto& term : f) {
      if (term.logpow == 1 && std::abs(term.exponent) < 1e-12) log_coeff += term.coeff(comp);
      if (term.logpow == 0 && std::abs(term.exponent + 1.0) < 1e-12) t_coeff += term.coeff(comp);
    }
    if (std::abs(log_coeff) > 1e-12) return (t_coeff / log_coeff).real();
  }
  return std::nan("");
}

void e0_branches(Outcome& out) {
  for (auto [spec, delta] : {std::pair{sphere_spectrum(2, 3), 0.3}, std::pair{table_spectrum(2, {{0.0, 1}, {-6.0, 3}}), 1.4}}) {
    const double gamma = -0.5 + delta;
    const auto ref = e0_space({spec, 0.0}, gamma);
    for (double phi : {0.3, -0.7}) {
      out.check(same_span(e0_space({spec, phi}, gamma).e.basis, ref.e.basis, spec.dim(), 1e-10), "n = 2 E_0 depends on the warp");
    }
  }
  const auto spec = circle_spectrum(0.5, 3);
  const double phi = 0.3, gamma = -1.0 + 1.5;
  const WarpedMetricModel model{spec, phi};
  const auto dim = spec.dim();
  const auto e0 = e0_space(model, gamma);
  const double c = log_partner(e0.e, 0);

  // the same pole for the decoupled mode-0 scalar symbol: f_0 = z^2, f_1 = -phi' z
  const auto scalar = build_sequence({{CMatrix::Zero(1, 1), CMatrix::Zero(1, 1), CMatrix::Identity(1, 1)},
                                      {CMatrix::Zero(1, 1), CMatrix::Constant(1, 1, -phi), CMatrix::Zero(1, 1)},
                                      {CMatrix::Zero(1, 1), CMatrix::Zero(1, 1), CMatrix::Zero(1, 1)}},
                                     2, 1);
  const auto rec = run_recursion(scalar, 1);
  const double oracle = log_partner(e_space(scalar, &rec, 0.0, gamma).e, 0);
  out.check(std::abs(c - oracle) < 1e-10, "residue oracle mismatch " + fmt(std::abs(c - oracle)));

  const AsymptoticFunction one{{CVector::Unit(dim, 0), 0.0, 0}};
  const AsymptoticFunction log_t{{CVector::Unit(dim, 0), 0.0, 1}};
  const AsymptoticFunction literal = sum(log_t, {{CVector::Unit(dim, 0) * phi, -1.0, 0}});
  out.check(same_span(e0.e.basis, {one, literal}, dim, 1e-10), "basis {1, log t + phi' t}: computed t-coefficient " + fmt(c) + ", expected " + fmt(phi));

  const auto corr = build_correspondence(conormal_of_laplacian(model), gamma);
  for (const auto& f : e0.e.basis) {
    const auto img = theta_on_selection(corr, span_of({f}), Direction::Forward);
    bool stripped = true;
    for (const auto& g : img.basis) {
      for (const auto& term : g) stripped = stripped && (std::abs(term.exponent) < 1e-12 || term.coeff.norm() < 1e-10);
    }
    out.check(stripped, "theta_0 leaves a t-term");
  }
  out.note("t-coefficient " + fmt(c) + ", residue oracle " + fmt(oracle));
}

WarpedMetricModel sphere2(double phi = 0.3, int count = 3) { return {sphere_spectrum(2, count), phi}; }

void resolvent_suite(Outcome& out, int jobs) {
  const auto model = sphere2();
  const double gamma = 0.2;
  const auto ext = pme_extension(model, gamma);
  const auto d = check_extension_rules(indicial_model(model.spectrum), ext.indicial, gamma);
  out.check(d.ok, "PME selection fails the extension rules");

  AssembleOptions warped;
  warped.frozen = false;
  const auto op = negated(assemble(model, constants_selection(), make_grid(1e-4, 1.0, 400), warped));
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& ev : mode_spectra(op, jobs)) {
    for (auto v : ev) lowest = std::min(lowest, v.real());
  }
  out.check(lowest > -1e-6, "eigenvalue real part " + fmt(lowest));

  SectorSpec sector;
  sector.rays = {kPi, 0.75 * kPi};
  sector.radii = geometric_radii(1.0, 1e4, 4);
  const auto res = resolvent_sweep(op, sector, {0, 0.0}, jobs);
  out.check(std::isfinite(res.sup_norm), "sup norm not finite");
  out.check(res.fitted_exponent >= -1.05 && res.fitted_exponent <= -0.95, "decay exponent " + fmt(res.fitted_exponent));
  out.note("min Re eigenvalue " + fmt(lowest) + ", sup " + fmt(res.sup_norm) + ", exponent " + fmt(res.fitted_exponent));
}

/// f(A) for a real tridiagonal A via the symmetrized eigendecomposition.
CMatrix tridiagonal_calculus(const RMatrix& a, const std::function<cplx(double)>& f) {
  const auto m = a.rows();
  RVector d(m);
  d(0) = 1.0;
  for (Eigen::Index i = 0; i + 1 < m; ++i) d(i + 1) = d(i) * std::sqrt(a(i, i + 1) / a(i + 1, i));
  const RMatrix s = d.asDiagonal() * a * d.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (s + s.transpose()));
  CVector fl(m);
  for (Eigen::Index i = 0; i < m; ++i) fl(i) = f(es.eigenvalues()(i));
  const CMatrix q = es.eigenvectors().cast<cplx>();
  return d.cwiseInverse().cast<cplx>().asDiagonal() * (q * fl.asDiagonal() * q.adjoint()) * d.cast<cplx>().asDiagonal();
}

void hinfty_suite(Outcome& out, int jobs) {
  std::vector<double> cs;
  for (int m : {200, 400}) {
    const auto op = negated(assemble(sphere2(0.3, 2), constants_selection(), make_grid(1e-2, 1.0, m)), 1.0);
    cs.push_back(hinfty_probe(op, standard_family(), {0, 0.0}, {}, jobs).c_hinfty);
  }
  const double ratio = std::max(cs[0], cs[1]) / std::min(cs[0], cs[1]);
  out.check(ratio < 2.0, "H-infinity constant ratio " + fmt(ratio));

  const auto g = make_grid(1e-2, 1.0, 120);
  const auto op = negated(assemble(sphere2(), constants_selection(), g), 1.0);
  const NormMetric metric(g, op.n, {});
  ScalarFunction f = [](cplx z) { return (z - 1.0) / ((z + 2.0) * (z + 0.5)); };
  double worst = 0.0;
  for (std::size_t k = 0; k < op.modes.size(); ++k) {
    const CMatrix got = dunford_apply(op, k, f);
    const CMatrix oracle = tridiagonal_calculus(op.dense(k), [&f](double z) { return f(z); });
    worst = std::max(worst, spectral_norm(metric.conjugate(got - oracle)) / spectral_norm(metric.conjugate(oracle)));
  }
  out.check(worst < 1e-8, "Dunford vs eigendecomposition " + fmt(worst));
  out.note("C(M=200) " + fmt(cs[0]) + ", C(M=400) " + fmt(cs[1]) + ", Dunford gap " + fmt(worst));
}

void dilation_suite(Outcome& out) {
  const auto g = make_grid(1e-4, 1.0, 400);
  CVector u = CVector::Zero(g.size);
  for (int i = 0; i < g.size; ++i) {
    const double s = std::log(g.t[static_cast<std::size_t>(i)]);
    const double c = std::log(1e-2), w = 1.5;
    if (std::abs(s - c) < w) u(i) = std::pow(std::cos(0.5 * kPi * (s - c) / w), 4) * cplx(1.0, 0.3 * s);
  }
  const auto op = assemble(sphere2(0.3, 3), constants_selection(), g);
  double defect = 0.0, unitarity = 0.0;
  for (int k : {-5, 3, 20}) {
    for (std::size_t j = 0; j < op.modes.size(); ++j) defect = std::max(defect, homogeneity_defect(op, j, u, k));
    for (int n : {1, 2, 3}) unitarity = std::max(unitarity, std::abs(k00_norm(dilation(u, k, n, g), n, g) / k00_norm(u, n, g) - 1.0));
  }
  out.check(defect < 1e-10, "commutation defect " + fmt(defect));
  out.check(unitarity < 1e-12, "unitarity defect " + fmt(unitarity));
  out.note("commutation " + fmt(defect) + ", unitarity " + fmt(unitarity));
}

PMEConfig pme_reference(int m_points = 400, double t_min = 1e-4) {
  PMEConfig c;
  c.model = {sphere_spectrum(2, 2), 0.3};
  c.grid = make_grid(t_min, 1.0, m_points);
  c.u0 = reference_data(c.grid);
  return c;
}

void pme_suite(Outcome& out) {
  {
    auto c = pme_reference();
    c.u0 = RVector::Constant(c.grid.size, 2.5);
    const PMESolver solver(c);
    auto st = solver.initial();
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const auto next = solver.step(st);
      worst = std::max(worst, (next.u - st.u).cwiseAbs().maxCoeff());
      st = next;
    }
    out.check(worst < 1e-12, "constant drift " + fmt(worst));
  }
  {
    auto c = pme_reference();
    c.m = 1.0;
    c.horizon = 0.02;
    const PMESolver solver(c);
    Eigen::EigenSolver<RMatrix> es(solver.op().dense());
    const CMatrix v = es.eigenvectors();
    const CVector coeffs = v.partialPivLu().solve(c.u0.cast<cplx>());
    CVector e(coeffs.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = std::exp(c.horizon * es.eigenvalues()(i)) * coeffs(i);
    const RVector exact = (v * e).real();
    std::vector<double> errs;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
      c.dt = dt;
      errs.push_back(k0_norm(solve(c, 0).trajectory.back().u - exact, c.grid, 2, c.gamma));
    }
    const double r1 = errs[0] / errs[1], r2 = errs[1] / errs[2];
    out.check(std::abs(r1 - 2.0) < 0.2 && std::abs(r2 - 2.0) < 0.2, "m = 1 error ratios " + fmt(r1) + ", " + fmt(r2));
    out.note("m = 1 ratios " + fmt(r1) + ", " + fmt(r2));
  }
  {
    std::vector<RVector> sols;
    LogGrid coarse_grid;
    for (int m : {201, 401, 801}) {
      auto c = pme_reference(m, 1e-2);
      c.horizon = 0.01;
      sols.push_back(solve(c, 0).trajectory.back().u);
      if (m == 201) coarse_grid = c.grid;
    }
    auto restrict = [](const RVector& u, int stride) {
      RVector r((u.size() - 1) / stride + 1);
      for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = u(i * stride);
      return r;
    };
    const double e1 = k0_norm(sols[0] - restrict(sols[1], 2), coarse_grid, 2, 0.2);
    const double e2 = k0_norm(restrict(sols[1], 2) - restrict(sols[2], 4), coarse_grid, 2, 0.2);
    const double order = std::log2(e1 / e2);
    out.check(order >= 1.9, "m = 2 grid order " + fmt(order));
    out.note("m = 2 order " + fmt(order));
  }
  {
    const auto c = pme_reference();
    const auto rep = solve(c, 10);
    out.check(rep.positivity_ok && std::abs(rep.time_reached - c.horizon) < 1e-12 && rep.min_u > 0.0,
              "positivity lost at t = " + fmt(rep.time_reached));
  }
}

void tmax_robustness(Outcome& out, int jobs) {
  // fixed log-step h = ln(10) / 100 and t_min = 1e-2
  std::vector<double> sups;
  for (double t_max : {10.0, 20.0, 40.0}) {
    const int m = static_cast<int>(std::lround(100.0 * std::log10(t_max / 1e-2))) + 1;
    const auto op = negated(assemble(sphere2(0.3, 3), constants_selection(), make_grid(1e-2, t_max, m)));
    SectorSpec sector;
    sector.rays = {kPi, 0.75 * kPi};
    sector.radii = geometric_radii(1.0, 1e4, 4);
    sups.push_back(resolvent_sweep(op, sector, {0, 0.2}, jobs).sup_norm);
  }
  const auto [lo, hi] = std::minmax_element(sups.begin(), sups.end());
  const double spread = (*hi - *lo) / *lo;
  out.check(spread < 0.1, "sup-norm spread " + fmt(spread));
  out.note("sup norms " + fmt(sups[0]) + ", " + fmt(sups[1]) + ", " + fmt(sups[2]));
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // <= 0: no runtime bound
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gate"};
  std::vector<int> only;
  int jobs = 0;
  bool verbose = false;
  app.add_option("--criterion", only, "run only these criteria");
  app.add_option("--jobs", jobs, "parallel work items (0 = all cores)");
  app.add_flag("--verbose", verbose, "print measured values");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "half-axis suite", 5.0, half_axis_suite},
      {2, "recursion identity", 5.0, recursion_identity},
      {3, "Laplacian poles and partial fractions", 5.0, laplacian_poles},
      {4, "E_0 branches", 5.0, e0_branches},
      {5, "extension rules, spectrum, resolvent decay", 120.0, [jobs](Outcome& o) { resolvent_suite(o, jobs); }},
      {6, "H-infinity probe and Dunford oracle", 120.0, [jobs](Outcome& o) { hinfty_suite(o, jobs); }},
      {7, "dilation homogeneity", 0.0, dilation_suite},
      {8, "PME suite", 120.0, pme_suite},
      {9, "t_max robustness", 0.0, [jobs](Outcome& o) { tmax_robustness(o, jobs); }},
  };

  bool all_ok = true;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const Error& e) {
      out.failed.push_back(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0) out.check(secs < c.budget_s, "runtime " + fmt(secs) + " s over " + fmt(c.budget_s) + " s");
    const bool ok = out.failed.empty();
    all_ok = all_ok && ok;
    std::printf("%s criterion %d: %s (%.2f s)\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(), secs);
    for (const auto& f : out.failed) std::printf("    failed: %s\n", f.c_str());
    if (verbose) {
      for (const auto& n : out.notes) std::printf("    %s\n", n.c_str());
    }
    std::fflush(stdout);
  }
  return all_ok ? 0 : 1;
}
