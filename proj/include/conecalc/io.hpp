// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON forms of the library types.  Complex numbers are [re, im], matrices
// are row-major nested lists, polynomials list their constant term first.

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pme_solver.hpp"

namespace conecalc::io {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline cplx complex_from(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) fail(ErrorCode::InvalidInput, "complex number must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(to_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

inline CMatrix matrix_from(const json& j, Eigen::Index dim) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) fail(ErrorCode::ShapeMismatch, "matrix must have dim rows");
  CMatrix m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) fail(ErrorCode::ShapeMismatch, "matrix must be square");
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = complex_from(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

inline json to_json(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v(i)));
  return out;
}

inline CVector vector_from(const json& j) {
  if (!j.is_array()) fail(ErrorCode::InvalidInput, "vector must be a list");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from(j[i]);
  return v;
}

// MatrixPolynomial: {"dim": N, "coeffs": [matrix, ...]}
inline json to_json(const MatrixPolynomial& p) {
  json coeffs = json::array();
  for (const auto& c : p.coeffs()) coeffs.push_back(to_json(c));
  return {{"dim", p.dim()}, {"coeffs", coeffs}};
}

inline MatrixPolynomial polynomial_from(const json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("coeffs")) fail(ErrorCode::InvalidInput, "polynomial needs dim and coeffs");
  const auto dim = j.at("dim").get<Eigen::Index>();
  if (dim < 1) fail(ErrorCode::InvalidInput, "dim must be positive");
  std::vector<CMatrix> cs;
  for (const auto& c : j.at("coeffs")) cs.push_back(matrix_from(c, dim));
  return MatrixPolynomial(std::move(cs));
}

// Conormal sequence: {"mu", "n", "exact", "symbols": [poly f_0, poly f_1, ...]}
inline json to_json(const ConormalSequence& s) {
  json fs = json::array();
  for (const auto& f : s.fs) fs.push_back(to_json(f));
  return {{"mu", s.mu}, {"n", s.n}, {"exact", s.exact}, {"taylor_depth", s.taylor_depth}, {"symbols", fs}};
}

inline ConormalSequence sequence_from(const json& j) {
  if (!j.is_object() || !j.contains("symbols")) fail(ErrorCode::InvalidInput, "sequence needs symbols");
  const int mu = j.value("mu", 2);
  std::vector<std::vector<CMatrix>> taylor;
  Eigen::Index dim = 0;
  for (const auto& f : j.at("symbols")) {
    const auto p = polynomial_from(f);
    if (dim == 0) dim = p.dim();
    std::vector<CMatrix> row(static_cast<std::size_t>(mu) + 1, CMatrix::Zero(p.dim(), p.dim()));
    if (p.degree() > mu) fail(ErrorCode::ShapeMismatch, "symbol degree exceeds the operator order");
    for (int k = 0; k <= p.degree(); ++k) row[static_cast<std::size_t>(k)] = p.coeff(k);
    taylor.push_back(std::move(row));
  }
  auto seq = build_sequence(taylor, mu, j.value("n", 0), j.value("exact", false));
  if (j.contains("taylor_depth")) seq.taylor_depth = std::max(seq.taylor_depth, j.at("taylor_depth").get<int>());
  return seq;
}

// AsymptoticSpace: {"weight", "label", "basis": [[{coeff, exponent, logpow}, ...], ...]}
inline json to_json(const AsymptoticFunction& f) {
  json out = json::array();
  for (const auto& t : f) out.push_back({{"coeff", to_json(t.coeff)}, {"exponent", to_json(t.exponent)}, {"logpow", t.logpow}});
  return out;
}

inline AsymptoticFunction function_from(const json& j) {
  AsymptoticFunction f;
  for (const auto& t : j) f.push_back({vector_from(t.at("coeff")), complex_from(t.at("exponent")), t.value("logpow", 0)});
  return f;
}

inline json to_json(const AsymptoticSpace& s) {
  json basis = json::array();
  for (const auto& f : s.basis) basis.push_back(to_json(f));
  return {{"weight", s.weight}, {"label", to_string(s.label)}, {"dim", s.dim()}, {"basis", basis}};
}

inline AsymptoticSpace space_from(const json& j) {
  AsymptoticSpace s;
  s.weight = j.value("weight", 0.0);
  s.label = SpaceLabel::Selection;
  for (const auto& f : j.at("basis")) s.basis.push_back(function_from(f));
  return s;
}

/// Readable rendering, e.g. "1 + 0.3 t" or "[0,1] t^-1 log t".
inline std::string describe(const AsymptoticFunction& f, double tol = 1e-12) {
  auto clean = [tol](double x) { return std::abs(x) < tol ? 0.0 : x; };
  auto number = [&clean](cplx c) {
    std::ostringstream os;
    const double re = clean(c.real()), im = clean(c.imag());
    if (im == 0.0) {
      os << re;
    } else {
      os << "(" << re << (im < 0 ? "-" : "+") << std::abs(im) << "i)";
    }
    return os.str();
  };
  std::ostringstream os;
  bool first = true;
  for (const auto& t : f) {
    if (t.coeff.cwiseAbs().maxCoeff() < tol) continue;
    if (!first) os << " + ";
    first = false;
    if (t.coeff.size() == 1) {
      os << number(t.coeff(0));
    } else {
      os << "[";
      for (Eigen::Index i = 0; i < t.coeff.size(); ++i) os << (i ? "," : "") << number(t.coeff(i));
      os << "]";
    }
    const cplx p = -t.exponent;  // t^{-exponent}
    if (std::abs(p) > tol) {
      os << " t";
      if (std::abs(p - cplx(1.0)) > tol) os << "^" << number(p);
    }
    if (t.logpow == 1) os << " log t";
    if (t.logpow > 1) os << " log^" << t.logpow << " t";
  }
  return first ? "0" : os.str();
}

// Spectrum: {"n": 2, "modes": [{"lambda": 0, "mult": 1}, ...]}
inline json to_json(const CrossSectionSpectrum& s) {
  json modes = json::array();
  for (const auto& m : s.modes) modes.push_back({{"lambda", m.lambda}, {"mult", m.mult}});
  return {{"n", s.n}, {"modes", modes}, {"source", s.source}};
}

inline CrossSectionSpectrum spectrum_from(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("modes")) fail(ErrorCode::InvalidInput, "spectrum needs n and modes");
  std::vector<SpectrumMode> modes;
  for (const auto& m : j.at("modes")) modes.push_back({m.at("lambda").get<double>(), m.value("mult", 1)});
  return table_spectrum(j.at("n").get<int>(), std::move(modes));
}

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidInput, path + ": " + e.what());
  }
}

/// "circle:R", "sphere:N" (optionally ":count") or a JSON file.
inline CrossSectionSpectrum parse_spectrum(const std::string& arg, int count = 4) {
  auto number_after = [&arg](std::size_t pos) {
    const auto rest = arg.substr(pos);
    const auto colon = rest.find(':');
    return std::make_pair(rest.substr(0, colon), colon == std::string::npos ? std::string() : rest.substr(colon + 1));
  };
  try {
    if (arg.rfind("circle:", 0) == 0) {
      const auto [r, c] = number_after(7);
      return circle_spectrum(std::stod(r), c.empty() ? count : std::stoi(c));
    }
    if (arg.rfind("sphere:", 0) == 0) {
      const auto [n, c] = number_after(7);
      return sphere_spectrum(std::stoi(n), c.empty() ? count : std::stoi(c));
    }
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidInput, "cannot parse spectrum '" + arg + "'");
  }
  return spectrum_from(read_file(arg));
}

struct Manifest {
  std::string command;
  std::vector<std::string> inputs;
  json parameters = json::object();
  std::string timestamp;  // empty unless requested

  json to_json() const {
    json j = {{"command", command}, {"inputs", inputs}, {"parameters", parameters}, {"tool_version", kToolVersion}};
    if (!timestamp.empty()) j["timestamp"] = timestamp;
    return j;
  }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path);
  out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace conecalc::io
