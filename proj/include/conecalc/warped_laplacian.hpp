// SPDX-License-Identifier: Apache-2.0
#pragma once

// Laplacian of a conformally warped cone metric dt^2 + t^2 phi(t)^2 h(0),
//   Delta = t^{-2}((t d_t)^2 - (n-1+H(t))(-t d_t) + Delta_t),
// with the model warp phi(t) = exp(phi'(0) t): H(t) = n phi'(0) t and
// Delta_t = exp(-2 phi'(0) t) Delta_0.  Everything is diagonal in the
// eigenbasis of Delta_0.

#include <cmath>
#include <string>
#include <vector>

#include "extension_domains.hpp"

namespace conecalc {

struct SpectrumMode {
  double lambda = 0.0;  // eigenvalue of Delta_0 (<= 0)
  int mult = 1;
};

struct CrossSectionSpectrum {
  int n = 2;
  std::vector<SpectrumMode> modes;
  std::string source = "table";

  int truncation() const { return static_cast<int>(modes.size()); }
  Eigen::Index dim() const {
    Eigen::Index d = 0;
    for (const auto& m : modes) d += m.mult;
    return d;
  }
  /// First coordinate of mode j in the expanded eigenbasis.
  Eigen::Index offset(int j) const {
    Eigen::Index d = 0;
    for (int i = 0; i < j; ++i) d += modes[static_cast<std::size_t>(i)].mult;
    return d;
  }
};

inline void validate_spectrum(const CrossSectionSpectrum& s) {
  if (s.n < 1) fail(ErrorCode::InvalidInput, "cross-section dimension must be positive");
  if (s.modes.empty()) fail(ErrorCode::InvalidInput, "empty spectrum");
  if (s.modes.front().lambda != 0.0) fail(ErrorCode::InvalidInput, "spectrum must start with lambda_0 = 0");
  for (std::size_t i = 0; i < s.modes.size(); ++i) {
    if (s.modes[i].mult < 1) fail(ErrorCode::InvalidInput, "multiplicities must be positive");
    if (s.modes[i].lambda > 0.0) fail(ErrorCode::InvalidInput, "eigenvalues must be <= 0");
    if (i > 0 && !(s.modes[i].lambda < s.modes[i - 1].lambda)) fail(ErrorCode::InvalidInput, "eigenvalues must decrease strictly");
  }
}

inline CrossSectionSpectrum table_spectrum(int n, std::vector<SpectrumMode> modes) {
  CrossSectionSpectrum s{n, std::move(modes), "table"};
  validate_spectrum(s);
  return s;
}

/// Circle of radius r: lambda_j = -(j/r)^2, multiplicity 2 for j > 0.
inline CrossSectionSpectrum circle_spectrum(double radius, int count = 4) {
  if (radius <= 0.0 || count < 1) fail(ErrorCode::InvalidInput, "circle needs radius > 0 and count >= 1");
  CrossSectionSpectrum s;
  s.n = 1;
  s.source = "circle:" + std::to_string(radius);
  for (int j = 0; j < count; ++j) s.modes.push_back({-(j / radius) * (j / radius), j == 0 ? 1 : 2});
  return s;
}

/// Unit sphere S^n: lambda_k = -k(k+n-1), multiplicity C(n+k,n) - C(n+k-2,n).
inline CrossSectionSpectrum sphere_spectrum(int n, int count = 4) {
  if (n < 1 || count < 1) fail(ErrorCode::InvalidInput, "sphere needs n >= 1 and count >= 1");
  auto binom = [](int a, int b) {
    if (b < 0 || a < b) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  CrossSectionSpectrum s;
  s.n = n;
  s.source = "sphere:" + std::to_string(n);
  for (int k = 0; k < count; ++k) {
    s.modes.push_back({-static_cast<double>(k) * (k + n - 1), static_cast<int>(std::lround(binom(n + k, n) - binom(n + k - 2, n)))});
  }
  return s;
}

struct WarpedMetricModel {
  CrossSectionSpectrum spectrum;
  double phi0prime = 0.0;
  int taylor_depth = 2;

  int n() const { return spectrum.n; }
  double hdot0() const { return spectrum.n * phi0prime; }
  /// lambda_j(t) = exp(-2 phi' t) lambda_j
  double lambda_at(int j, double t) const { return std::exp(-2.0 * phi0prime * t) * spectrum.modes[static_cast<std::size_t>(j)].lambda; }
  double h_at(double t) const { return spectrum.n * phi0prime * t; }
};

struct ModeRoots {
  int mode = 0;
  double lambda = 0.0;
  int mult = 1;
  double q_plus = 0.0;
  double q_minus = 0.0;
};

struct LaplacianPoleData {
  int n = 2;
  std::vector<ModeRoots> modes;
  std::vector<std::pair<double, int>> merged;  // distinct q with combined multiplicity, ascending
  double eps_bar = std::numeric_limits<double>::infinity();  // -q_1^-
};

inline double delta_of(int n, double gamma) { return gamma - 0.5 * (n - 3); }

/// I_gamma = ((n+1)/2 - 2 - gamma, (n+1)/2 - gamma).
inline std::pair<double, double> interval_I(int n, double gamma) { return {0.5 * (n + 1) - 2.0 - gamma, 0.5 * (n + 1) - gamma}; }

inline LaplacianPoleData q_poles(const CrossSectionSpectrum& spec) {
  validate_spectrum(spec);
  LaplacianPoleData d;
  d.n = spec.n;
  const double h = 0.5 * (spec.n - 1);
  for (int j = 0; j < spec.truncation(); ++j) {
    const auto& m = spec.modes[static_cast<std::size_t>(j)];
    const double r = std::sqrt(h * h - m.lambda);
    d.modes.push_back({j, m.lambda, m.mult, h + r, h - r});
  }
  if (d.modes.size() > 1) d.eps_bar = -d.modes[1].q_minus;
  auto add = [&](double q, int mult) {
    for (auto& [v, k] : d.merged) {
      if (std::abs(v - q) < 1e-12 * std::max(1.0, std::abs(q))) {
        k += mult;
        return;
      }
    }
    d.merged.emplace_back(q, mult);
  };
  for (const auto& m : d.modes) {
    add(m.q_minus, m.mult);
    add(m.q_plus, m.mult);
  }
  std::sort(d.merged.begin(), d.merged.end());
  return d;
}

/// f_0 = z^2 - (n-1) z + Delta_0, f_1 = -2 phi' Delta_0 - n phi' z,
/// f_l = (-2 phi')^l / l! Delta_0 for l >= 2 (up to the model's Taylor depth).
inline ConormalSequence conormal_of_laplacian(const WarpedMetricModel& model) {
  validate_spectrum(model.spectrum);
  const auto dim = model.spectrum.dim();
  CMatrix delta0 = CMatrix::Zero(dim, dim);
  for (int j = 0; j < model.spectrum.truncation(); ++j) {
    const auto& m = model.spectrum.modes[static_cast<std::size_t>(j)];
    delta0.diagonal().segment(model.spectrum.offset(j), m.mult).setConstant(m.lambda);
  }
  const CMatrix id = CMatrix::Identity(dim, dim);
  const CMatrix zero = CMatrix::Zero(dim, dim);
  const int n = model.n();
  const double p = model.phi0prime;
  std::vector<std::vector<CMatrix>> taylor;
  taylor.push_back({delta0, id * cplx(-(n - 1.0)), id});
  double fact = 1.0;
  for (int l = 1; l <= model.taylor_depth; ++l) {
    fact *= l;
    const CMatrix a0 = delta0 * (std::pow(-2.0 * p, l) / fact);
    const CMatrix a1 = l == 1 ? CMatrix(id * cplx(-n * p)) : zero;
    taylor.push_back({a0, a1, zero});
  }
  return build_sequence(taylor, 2, n);
}

/// Ehat_q for every pole q in I_gamma.
inline std::vector<std::pair<double, AsymptoticSpace>> maximal_domain(const WarpedMetricModel& model, double gamma) {
  const auto seq = conormal_of_laplacian(model);
  std::vector<std::pair<double, AsymptoticSpace>> out;
  for (const auto& p : pole_set(seq, gamma)) {
    auto hat = hat_space(seq, p.sigma);
    hat.weight = gamma;
    out.emplace_back(p.sigma.real(), std::move(hat));
  }
  return out;
}

/// (n-3)/2 < gamma < (n-3)/2 + min(eps_bar, 2), and for n <= 2 no pole on Re z = (n+1)/2 - gamma.
inline Diagnostics pme_weight_check(const WarpedMetricModel& model, double gamma) {
  Diagnostics d;
  const int n = model.n();
  const auto poles = q_poles(model.spectrum);
  const double lo = 0.5 * (n - 3);
  const double hi = lo + std::min(poles.eps_bar, 2.0);
  if (!(gamma > lo && gamma < hi)) {
    std::ostringstream os;
    os << "gamma = " << gamma << " outside (" << lo << ", " << hi << ")";
    d.add(os.str());
  }
  if (n <= 2) {
    const double line = 0.5 * (n + 1) - gamma;
    for (const auto& [q, mult] : poles.merged) {
      if (std::abs(q - line) < kStripTol) {
        std::ostringstream os;
        os << "pole " << q << " on Re z = " << line;
        d.add(os.str());
      }
    }
  }
  return d;
}

/// E_0 and theta_0 for the Laplacian.
inline PoleDomain e0_space(const WarpedMetricModel& model, double gamma) {
  const auto seq = conormal_of_laplacian(model);
  const int ms = mu_sigma(0.0, gamma, 2, model.n());
  std::optional<RecursionResult> rec;
  if (ms > 0) rec = run_recursion(seq, ms);
  return e_space(seq, rec ? &*rec : nullptr, 0.0, gamma);
}

inline IndicialModel indicial_model(const CrossSectionSpectrum& spec) {
  IndicialModel m;
  m.n = spec.n;
  for (const auto& r : q_poles(spec).modes) {
    m.roots.push_back({r.mode, -1, r.q_minus, r.mult});
    m.roots.push_back({r.mode, +1, r.q_plus, r.mult});
  }
  return m;
}

/// 1 (x) E_0 on the cone, its model cone image, and the per-root description.
struct PMEExtension {
  AsymptoticSpace selection;        // underline E_0
  AsymptoticSpace model_selection;  // Theta(underline E_0)
  IndicialSelection indicial;
  PoleDomain e0;
};

inline AsymptoticSpace constants_space(const CrossSectionSpectrum& spec, double gamma) {
  std::vector<AsymptoticFunction> basis;
  for (int i = 0; i < spec.modes.front().mult; ++i) basis.push_back({{CVector::Unit(spec.dim(), i), 0.0, 0}});
  return {basis, gamma, SpaceLabel::Selection};
}

inline PMEExtension pme_extension(const WarpedMetricModel& model, double gamma) {
  const auto check = pme_weight_check(model, gamma);
  if (!check.ok) fail(ErrorCode::WeightOnPole, "weight violates the PME conditions: " + check.violations.front());
  PMEExtension ext;
  ext.e0 = e0_space(model, gamma);
  ext.selection = constants_space(model.spectrum, gamma);
  DomainCorrespondence corr;
  corr.gamma = gamma;
  corr.dim = model.spectrum.dim();
  corr.poles.push_back(ext.e0);
  ext.model_selection = theta_on_selection(corr, ext.selection, Direction::Forward);
  ext.indicial.subspaces[{0, -1}] = CMatrix::Identity(model.spectrum.modes.front().mult, model.spectrum.modes.front().mult);
  ext.indicial.log_pair = LogPairChoice::Constants;
  return ext;
}

}  // namespace conecalc
