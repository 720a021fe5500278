// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "conecalc/extension_domains.hpp"

using namespace conecalc;

namespace {

AsymptoticSpace span_of(std::vector<AsymptoticFunction> fs) { return {std::move(fs), 0.0, SpaceLabel::Selection}; }

bool spans_equal(const AsymptoticSpace& a, const std::vector<AsymptoticFunction>& b) { return same_span(a.basis, b, 1); }

// [a + bt, c + dt] for A_alpha, by hand
cplx half_axis_pairing(cplx a, cplx b, cplx c, cplx d, double alpha) {
  return a * std::conj(d) - b * std::conj(c) + alpha * a * std::conj(c);
}

}  // namespace

TEST(MuSigma, HalfAxis) {
  EXPECT_EQ(mu_sigma(0.0, 0.0, 2, 0), 1);
  EXPECT_EQ(mu_sigma(-1.0, 0.0, 2, 0), 0);
  try {
    mu_sigma(0.0, 0.5, 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateWeight);
  }
}

TEST(FormalAdjoint, HalfAxisFlipsAlpha) {
  const auto adj = formal_adjoint(half_axis_sequence(0.7));
  const auto ref = half_axis_sequence(-0.7);
  for (cplx z : {cplx(0.3, 0.1), cplx(-2.0, 1.0)}) {
    EXPECT_NEAR(std::abs(adj.fs[0](z)(0, 0) - ref.fs[0](z)(0, 0)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(adj.fs[1](z)(0, 0) - ref.fs[1](z)(0, 0)), 0.0, 1e-14);
  }
}

TEST(ESpace, HalfAxis) {
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto corr = build_correspondence(half_axis_sequence(alpha), 0.0);
    ASSERT_EQ(corr.poles.size(), 2u);
    const auto& e_minus1 = corr.poles[0];
    const auto& e_0 = corr.poles[1];
    EXPECT_EQ(e_0.mu_s, 1);
    EXPECT_EQ(e_minus1.mu_s, 0);
    EXPECT_TRUE(spans_equal(e_0.e, {half_axis_function(1.0, alpha)}));
    EXPECT_TRUE(spans_equal(e_0.hat, {half_axis_function(1.0, 0.0)}));
    EXPECT_TRUE(spans_equal(e_minus1.e, {half_axis_function(0.0, 1.0)}));
    EXPECT_TRUE(same_span(corr.e_basis(), {half_axis_function(1.0, 0.0), half_axis_function(0.0, 1.0)}, 1));
    EXPECT_EQ(e_0.e.dim(), e_0.hat.dim());
  }
}

TEST(ESpace, StraightConeEqualsHat) {
  const auto seq = half_axis_sequence(0.0);
  const auto corr = build_correspondence(seq, 0.0);
  for (const auto& p : corr.poles) {
    EXPECT_TRUE(same_span(p.e.basis, p.hat.basis, 1));
    EXPECT_LT((p.theta - CMatrix::Identity(p.theta.rows(), p.theta.cols())).norm(), 1e-14);
  }
}

TEST(HatSpace, RankOneResidue) {
  // f_0 = diag(z - 1, z - 2, z - 3): residue at 1 has rank one in a 3-dim model
  CMatrix c0 = CMatrix::Zero(3, 3);
  c0.diagonal() << -1.0, -2.0, -3.0;
  const auto seq = build_sequence({{c0, CMatrix::Identity(3, 3)}}, 1, 2);
  const auto hat = hat_space(seq, 1.0);
  EXPECT_EQ(hat.dim(), 1u);
}

TEST(ThetaOnSelection, HalfAxisFormula) {
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto corr = build_correspondence(half_axis_sequence(alpha), 0.0);
    for (auto [a, b] : {std::pair<double, double>{1.0, 0.0}, {2.0, -1.0}, {0.0, 1.0}, {-0.3, 4.0}}) {
      const auto img = theta_on_selection(corr, span_of({half_axis_function(a, b)}), Direction::Forward);
      EXPECT_TRUE(spans_equal(img, {half_axis_function(a, b - a * alpha)}));
      const auto back = theta_on_selection(corr, img, Direction::Inverse);
      EXPECT_TRUE(spans_equal(back, {half_axis_function(a, b)}));
    }
  }
}

TEST(ThetaOnSelection, NotInSpan) {
  const auto corr = build_correspondence(half_axis_sequence(0.5), 0.0);
  AsymptoticFunction t2{{CVector::Constant(1, 1.0), -2.0, 0}};
  try {
    theta_on_selection(corr, span_of({t2}), Direction::Forward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotInDomainSpan);
  }
}

TEST(Pairing, HalfAxisClosedForm) {
  const std::vector<std::array<cplx, 4>> cases{{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 1.0},
                                              {cplx(1, 2), cplx(-1, 0.5), cplx(0.3, -1), cplx(2, 1)}};
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto op = half_axis_sequence(alpha);
    for (const auto& [a, b, c, d] : cases) {
      const cplx val = pairing_closed_form(half_axis_function(a, b), half_axis_function(c, d), op);
      EXPECT_NEAR(std::abs(val - half_axis_pairing(a, b, c, d, alpha)), 0.0, 1e-10);
    }
  }
}

TEST(Pairing, HalfAxisQuadrature) {
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto op = half_axis_sequence(alpha);
    for (auto [a, b, c, d] : {std::array<cplx, 4>{1.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {1.0, -2.0, 0.5, 3.0}}) {
      const auto val = pairing_quadrature(half_axis_function(a, b), half_axis_function(c, d), op);
      EXPECT_NEAR(std::abs(val.value - half_axis_pairing(a, b, c, d, alpha)), 0.0, 1e-5);
    }
  }
}

TEST(Pairing, CutoffShapeIndependence) {
  const auto op = half_axis_sequence(0.5);
  PairingQuadrature septic;
  septic.cutoff = Cutoff(CutoffShape::SepticC3);
  const auto u = half_axis_function(1.0, 2.0), v = half_axis_function(-1.0, 1.0);
  EXPECT_NEAR(std::abs(pairing_quadrature(u, v, op).value - pairing_quadrature(u, v, op, septic).value), 0.0, 1e-5);
}

TEST(Pairing, MinimalDomainAnnihilates) {
  const auto op = half_axis_sequence(0.5);
  AsymptoticFunction t2{{CVector::Constant(1, 1.0), -2.0, 0}};
  for (const auto& v : {half_axis_function(1.0, 0.0), half_axis_function(0.0, 1.0)}) {
    EXPECT_NEAR(std::abs(pairing_closed_form(t2, v, op)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(pairing_quadrature(t2, v, op).value), 0.0, 1e-6);
  }
}

TEST(Pairing, Sesquilinear) {
  const auto op = half_axis_sequence(-2.0);
  const auto u1 = half_axis_function(1.0, 0.5), u2 = half_axis_function(-0.2, 1.0), v = half_axis_function(0.7, -1.0);
  const cplx s(0.3, 1.1);
  const cplx lhs = pairing_closed_form(sum(u1, scaled(u2, s)), scaled(v, s), op);
  const cplx rhs = std::conj(s) * (pairing_closed_form(u1, v, op) + s * pairing_closed_form(u2, v, op));
  EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12);
}

TEST(Pairing, DivergentInputRejected) {
  // t^{-1} is not in the maximal domain of A_alpha at gamma = 0
  AsymptoticFunction bad{{CVector::Constant(1, 1.0), 1.0, 0}};
  try {
    pairing_closed_form(bad, half_axis_function(1.0, 0.0), half_axis_sequence(0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
  }
}

TEST(Complement, HalfAxis) {
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto form = maximal_pairing(half_axis_sequence(alpha), 0.0);
    const auto perp = orthogonal_complement(span_of({half_axis_function(1.0, alpha)}), form);
    EXPECT_TRUE(spans_equal(perp, {half_axis_function(1.0, 0.0)}));
    const auto full = orthogonal_complement(span_of(form.left), form);
    EXPECT_EQ(full.dim(), 0u);
    const auto back = orthogonal_complement_left(perp, form);
    EXPECT_TRUE(spans_equal(back, {half_axis_function(1.0, alpha)}));
  }
}

TEST(Complement, MismatchIffAlphaNonzero) {
  for (double alpha : {0.0, 0.5, -2.0}) {
    const auto seq = half_axis_sequence(alpha);
    const auto e0 = span_of({half_axis_function(1.0, alpha)});
    // adjoint of A_alpha, then its model: Theta_{-alpha}(E0^perp)
    const auto perp = orthogonal_complement(e0, maximal_pairing(seq, 0.0));
    const auto adj_model = theta_on_selection(build_correspondence(formal_adjoint(seq), 0.0), perp, Direction::Forward);
    // model first, then adjoint in the model pairing
    const auto model = theta_on_selection(build_correspondence(seq, 0.0), e0, Direction::Forward);
    const auto model_adj = orthogonal_complement(model, maximal_pairing(half_axis_sequence(0.0), 0.0));
    EXPECT_EQ(same_span(adj_model.basis, model_adj.basis, 1), alpha == 0.0);
  }
}

TEST(Complement, DegeneratePairing) {
  PairingForm form;
  form.values = CMatrix::Zero(2, 2);
  form.dim = 1;
  form.left = {half_axis_function(1.0, 0.0), half_axis_function(0.0, 1.0)};
  form.right = form.left;
  try {
    orthogonal_complement(span_of({}), form);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegeneratePairing);
  }
}

TEST(CheckE2, HalfAxis) {
  EXPECT_TRUE(check_E2(half_axis_sequence(0.5), 0.0).ok);
  const auto d = check_E2(half_axis_sequence(0.5), 0.5);
  EXPECT_FALSE(d.ok);
  EXPECT_FALSE(d.violations.empty());
}

namespace {

IndicialModel two_mode_model(int n, double lambda1, int mult1) {
  IndicialModel m;
  m.n = n;
  auto add = [&](int mode, double lambda, int mult) {
    const double r = std::sqrt(0.25 * (n - 1) * (n - 1) - lambda);
    m.roots.push_back({mode, +1, 0.5 * (n - 1) + r, mult});
    m.roots.push_back({mode, -1, 0.5 * (n - 1) - r, mult});
  };
  add(0, 0.0, 1);
  add(1, lambda1, mult1);
  return m;
}

}  // namespace

TEST(ExtensionRules, ConstantsSelection) {
  // n = 3, gamma in ((n-3)/2, (n-3)/2 + min(eps, 2)): only q = 0 in I_gamma
  const auto model = two_mode_model(3, -3.0, 4);
  IndicialSelection sel;
  sel.subspaces[{0, -1}] = CMatrix::Identity(1, 1);
  EXPECT_TRUE(check_extension_rules(model, sel, 0.5).ok);
}

TEST(ExtensionRules, RuleThree) {
  const auto model = two_mode_model(3, -3.0, 4);
  IndicialSelection sel;
  sel.subspaces[{0, -1}] = CMatrix::Identity(1, 1);
  // gamma = -0.5: I_gamma = (0.5, 2.5) contains q_0^+ = 2 but I_{-gamma} = (-0.5, 1.5) does not
  sel.subspaces[{0, +1}] = CMatrix::Identity(1, 1);
  const auto d = check_extension_rules(model, sel, -0.5);
  EXPECT_FALSE(d.ok);
  ASSERT_FALSE(d.violations.empty());
  EXPECT_NE(d.violations.front().find("rule 3"), std::string::npos);
}

TEST(ExtensionRules, RuleOneComplementPairs) {
  // n = 2, gamma = -1/2 + delta with delta = 0.3: q = 0 and q = 1 lie in both intervals
  const auto model = two_mode_model(2, -2.0, 3);
  const double gamma = -0.5 + 0.3;
  IndicialSelection full_zero;
  full_zero.subspaces[{0, -1}] = CMatrix::Identity(1, 1);
  EXPECT_TRUE(check_extension_rules(model, full_zero, gamma).ok);
  IndicialSelection both;
  both.subspaces[{0, -1}] = CMatrix::Identity(1, 1);
  both.subspaces[{0, +1}] = CMatrix::Identity(1, 1);
  EXPECT_FALSE(check_extension_rules(model, both, gamma).ok);
}

TEST(ExtensionRules, LogPairChoices) {
  IndicialModel model;
  model.n = 1;
  model.roots = {{0, +1, 0.0, 1}, {0, -1, 0.0, 1}};
  IndicialSelection sel;
  sel.log_pair = LogPairChoice::Constants;
  EXPECT_TRUE(check_extension_rules(model, sel, 0.0).ok);
  sel.log_pair = LogPairChoice::Full;
  EXPECT_FALSE(check_extension_rules(model, sel, 0.0).ok);
}
