// SPDX-License-Identifier: Apache-2.0
// cone-calc: command-line front end.  Exit codes: 0 success, 2 invalid input,
// 3 numerical failure.

#include <chrono>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "conecalc/io.hpp"

using namespace conecalc;
using io::json;

namespace {

struct Common {
  int jobs = 1;
  bool timestamp = false;
  std::string report;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void emit(const Common& common, io::Manifest manifest, json report) {
  if (common.timestamp) manifest.timestamp = now_utc();
  report["manifest"] = manifest.to_json();
  if (common.report.empty()) {
    std::cout << io::dump(report);
  } else {
    io::write_text(common.report, io::dump(report));
  }
}

json space_json(const AsymptoticSpace& s) {
  json j = io::to_json(s);
  json readable = json::array();
  for (const auto& f : s.basis) readable.push_back(io::describe(f));
  j["readable"] = readable;
  return j;
}

json diagnostics_json(const Diagnostics& d) { return {{"ok", d.ok}, {"violations", d.violations}}; }

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidInput, "cannot parse number '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operator input shared by symbol and domains.

struct OperatorInput {
  std::string input;
  std::string fixture = "half-axis";
  double alpha = 0.5;
  std::string spectrum = "sphere:2";
  int count = 3;
  double warp = 0.0;
  int taylor_depth = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--input", input, "conormal sequence JSON");
    cmd->add_option("--fixture", fixture, "half-axis | laplacian")->check(CLI::IsMember({"half-axis", "laplacian"}));
    cmd->add_option("--alpha", alpha, "half-axis parameter");
    cmd->add_option("--spectrum", spectrum, "circle:R | sphere:N | file.json (laplacian fixture)");
    cmd->add_option("--count", count, "number of cross-section modes");
    cmd->add_option("--warp", warp, "phi'(0) (laplacian fixture)");
    cmd->add_option("--taylor-depth", taylor_depth, "Taylor depth of the warp");
  }

  ConormalSequence build() const {
    if (!input.empty()) return io::sequence_from(io::read_file(input));
    if (fixture == "half-axis") return half_axis_sequence(alpha);
    return conormal_of_laplacian({io::parse_spectrum(spectrum, count), warp, taylor_depth});
  }

  json echo() const {
    if (!input.empty()) return {{"input", input}};
    if (fixture == "half-axis") return {{"fixture", fixture}, {"alpha", alpha}};
    return {{"fixture", fixture}, {"spectrum", spectrum}, {"count", count}, {"warp", warp}, {"taylor_depth", taylor_depth}};
  }
};

json sum_of_spaces(const DomainCorrespondence& corr, bool hat) {
  AsymptoticSpace s;
  s.weight = corr.gamma;
  s.label = hat ? SpaceLabel::EHat : SpaceLabel::E;
  s.basis = hat ? corr.hat_basis() : corr.e_basis();
  return space_json(s);
}

int cmd_symbol(const Common& common, const OperatorInput& in, double gamma, int depth, int samples, unsigned seed) {
  const auto seq = in.build();
  json rep;
  rep["sequence"] = io::to_json(seq);
  json f0 = json::array();
  for (const auto& p : all_poles(seq.fs.front())) f0.push_back({{"value", io::to_json(p.value)}, {"multiplicity", p.multiplicity}});
  rep["f0_poles"] = f0;
  const auto [lo, hi] = weight_strip(seq.n, seq.mu, gamma);
  rep["strip"] = {lo, hi};
  json strip = json::array();
  for (const auto& p : pole_set(seq, gamma)) strip.push_back({{"sigma", io::to_json(p.sigma)}, {"order", p.order}});
  rep["poles_in_strip"] = strip;

  const int l = std::min(depth, seq.exact ? depth : seq.taylor_depth);
  const auto res = run_recursion(seq, l);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.2, 2.0);
  std::vector<cplx> zs;
  for (int i = 0; i < samples; ++i) zs.emplace_back(re(rng), im(rng));
  rep["recursion"] = {{"depth", l}, {"samples", samples}, {"seed", seed}, {"identity_defect", verify_identity(seq, res, zs)}};

  const auto corr = build_correspondence(seq, gamma);
  rep["E"] = sum_of_spaces(corr, false);
  rep["E_hat"] = sum_of_spaces(corr, true);

  io::Manifest m{"symbol", in.input.empty() ? std::vector<std::string>{} : std::vector<std::string>{in.input}, in.echo()};
  m.parameters["gamma"] = gamma;
  m.parameters["depth"] = depth;
  emit(common, m, rep);
  return 0;
}

int cmd_domains(const Common& common, const OperatorInput& in, double gamma, const std::string& selection, const std::string& pairing,
                const std::string& direction) {
  const auto seq = in.build();
  json rep;
  rep["check_E2"] = diagnostics_json(check_E2(seq, gamma));
  const auto corr = build_correspondence(seq, gamma);
  json poles = json::array();
  for (const auto& p : corr.poles) {
    poles.push_back({{"sigma", io::to_json(p.sigma)},
                     {"order", p.order},
                     {"mu_sigma", p.mu_s},
                     {"E_hat", space_json(p.hat)},
                     {"E", space_json(p.e)},
                     {"theta", io::to_json(p.theta)}});
  }
  rep["poles"] = poles;
  rep["E"] = sum_of_spaces(corr, false);
  rep["E_hat"] = sum_of_spaces(corr, true);

  std::vector<std::string> inputs;
  if (!in.input.empty()) inputs.push_back(in.input);
  if (!selection.empty()) {
    inputs.push_back(selection);
    auto sel = io::space_from(io::read_file(selection));
    sel.weight = gamma;
    const auto dir = direction == "inverse" ? Direction::Inverse : Direction::Forward;
    rep["selection"] = space_json(sel);
    rep["theta_image"] = space_json(theta_on_selection(corr, sel, dir));
    const auto method = pairing == "quadrature" ? PairingMethod::Quadrature : PairingMethod::ClosedForm;
    const auto form = maximal_pairing(seq, gamma, method);
    rep["pairing"] = {{"method", pairing}, {"values", io::to_json(form.values)}};
    rep["adjoint_complement"] = space_json(orthogonal_complement(sel, form));
  }
  io::Manifest m{"domains", inputs, in.echo()};
  m.parameters["gamma"] = gamma;
  m.parameters["pairing"] = pairing;
  m.parameters["direction"] = direction;
  emit(common, m, rep);
  return 0;
}

int cmd_laplacian(const Common& common, const std::string& spectrum, int count, double gamma, double warp, int depth) {
  const WarpedMetricModel model{io::parse_spectrum(spectrum, count), warp, depth};
  const int n = model.n();
  json rep;
  rep["spectrum"] = io::to_json(model.spectrum);
  const auto poles = q_poles(model.spectrum);
  json modes = json::array();
  for (const auto& r : poles.modes) {
    modes.push_back({{"mode", r.mode}, {"lambda", r.lambda}, {"mult", r.mult}, {"q_plus", r.q_plus}, {"q_minus", r.q_minus}});
  }
  rep["q_poles"] = modes;
  rep["eps_bar"] = poles.eps_bar;
  const auto [a, b] = interval_I(n, gamma);
  rep["I_gamma"] = {a, b};
  rep["delta"] = delta_of(n, gamma);

  json domains = json::array();
  for (const auto& [q, hat] : maximal_domain(model, gamma)) domains.push_back({{"q", q}, {"E_hat", space_json(hat)}});
  rep["maximal_domain"] = domains;

  const auto weight = pme_weight_check(model, gamma);
  rep["pme_weight_check"] = diagnostics_json(weight);
  const auto e0 = e0_space(model, gamma);
  rep["E0"] = {{"mu_sigma", e0.mu_s}, {"E_hat", space_json(e0.hat)}, {"E", space_json(e0.e)}, {"theta", io::to_json(e0.theta)}};
  if (weight.ok) {
    const auto ext = pme_extension(model, gamma);
    rep["pme_extension"] = {{"selection", space_json(ext.selection)},
                            {"model_selection", space_json(ext.model_selection)},
                            {"extension_rules", diagnostics_json(check_extension_rules(indicial_model(model.spectrum), ext.indicial, gamma))}};
  }
  io::Manifest m{"laplacian", {}, {{"spectrum", spectrum}, {"count", count}, {"gamma", gamma}, {"warp", warp}, {"taylor_depth", depth}}};
  emit(common, m, rep);
  return 0;
}

struct ProbeArgs {
  std::string spectrum = "sphere:2";
  int count = 3;
  double gamma = 0.0;
  double warp = 0.3;
  bool frozen = false;
  double grid_min = 1e-4;
  double t_max = 1.0;
  int grid_size = 400;
  double sector_angle = kPi / 4;
  std::string rays_pi = "1,0.75";
  std::string radii;
  bool radii_given = false;
  double r_min = 1.0, r_max = 1e4;
  int per_decade = 4;
  double shift = 0.0;
  int norm_s = 0;
  bool hinfty = false;
  int dilation = 3;
  std::string out;
};

int cmd_probe(const Common& common, const ProbeArgs& a) {
  const WarpedMetricModel model{io::parse_spectrum(a.spectrum, a.count), a.warp};
  AssembleOptions opt;
  opt.frozen = a.frozen;
  const auto grid = make_grid(a.grid_min, a.t_max, a.grid_size);
  const auto base = assemble(model, constants_selection(), grid, opt);
  const auto op = negated(base, a.shift);

  SectorSpec sector;
  sector.theta = a.sector_angle;
  sector.rays.clear();
  if (!(sector.theta > 0.0 && sector.theta < kPi)) fail(ErrorCode::InvalidInput, "sector angle must lie in (0, pi)");
  for (double r : parse_list(a.rays_pi)) sector.rays.push_back(r * kPi);
  if (sector.rays.empty()) sector.rays = {kPi};
  sector.radii = a.radii_given ? parse_list(a.radii) : geometric_radii(a.r_min, a.r_max, a.per_decade);
  // rays must stay in Lambda(theta)
  for (double r : sector.rays) {
    if (r < sector.theta - 1e-12 || r > 2 * kPi - sector.theta + 1e-12) fail(ErrorCode::InvalidInput, "ray outside the sector");
  }
  const WeightedNormSpec norm{a.norm_s, a.gamma};
  const auto sweep = resolvent_sweep(op, sector, norm, common.jobs);

  json rep;
  rep["sup_norm"] = sweep.sup_norm;
  rep["fitted_exponent"] = sweep.fitted_exponent;
  rep["ray_exponents"] = sweep.ray_exponents;
  rep["min_real_eigenvalue"] = sweep.rows.empty() ? json(nullptr) : json(sweep.min_real_eigenvalue);
  rep["points"] = sweep.rows.size();

  std::ostringstream csv;
  csv << "lambda_re,lambda_im,norm\n";
  csv << std::setprecision(17);
  for (const auto& row : sweep.rows) csv << row.lambda.real() << "," << row.lambda.imag() << "," << row.norm << "\n";

  if (a.hinfty) {
    const auto hop = negated(base, a.shift > 0.0 ? a.shift : 1.0);
    const auto probe = hinfty_probe(hop, standard_family(), norm, {}, common.jobs);
    rep["C_hinfty"] = probe.c_hinfty;
    rep["hinfty_ratios"] = probe.ratios;
  } else {
    rep["C_hinfty"] = nullptr;
  }
  if (a.dilation != 0 && a.frozen) {
    CVector u = CVector::Zero(grid.size);
    const double c = 0.5 * (std::log(grid.t_min) + std::log(grid.t_max)), w = 0.25 * std::log(grid.t_max / grid.t_min);
    for (int i = 0; i < grid.size; ++i) {
      const double s = std::log(grid.t[static_cast<std::size_t>(i)]);
      if (std::abs(s - c) < w) u(i) = std::pow(std::cos(0.5 * kPi * (s - c) / w), 4);
    }
    json dil;
    double worst = 0.0;
    for (std::size_t k = 0; k < base.modes.size(); ++k) worst = std::max(worst, homogeneity_defect(base, k, u, a.dilation));
    dil["shift"] = a.dilation;
    dil["homogeneity_defect"] = worst;
    dil["unitarity_defect"] = std::abs(k00_norm(dilation(u, a.dilation, base.n, grid), base.n, grid) / k00_norm(u, base.n, grid) - 1.0);
    rep["dilation"] = dil;
  }

  io::Manifest m{"probe",
                 {},
                 {{"spectrum", a.spectrum},
                  {"count", a.count},
                  {"gamma", a.gamma},
                  {"warp", a.warp},
                  {"frozen", a.frozen},
                  {"grid_min", a.grid_min},
                  {"t_max", a.t_max},
                  {"grid_size", a.grid_size},
                  {"sector_angle", a.sector_angle},
                  {"rays", sector.rays},
                  {"radii", sector.radii},
                  {"shift", a.shift},
                  {"norm_s", a.norm_s},
                  {"hinfty", a.hinfty},
                  {"jobs", common.jobs}}};
  if (!a.out.empty()) {
    io::write_text(a.out, "# manifest: " + m.to_json().dump() + "\n" + csv.str());
    rep["csv"] = a.out;
  }
  emit(common, m, rep);
  return 0;
}

struct PmeArgs {
  std::string config;
  std::string spectrum = "sphere:2";
  double warp = 0.3;
  double m = 2.0, gamma = 0.2, s = 0.0, p = 20.0, q = 20.0, horizon = 0.05, dt = 1e-3;
  double grid_min = 1e-4, t_max = 1.0;
  int grid_size = 400;
  double u0_constant = 0.0;
  int every = 10;
  std::string out;
};

PMEConfig pme_config(PmeArgs& a, json& echo) {
  if (!a.config.empty()) {
    const auto j = io::read_file(a.config);
    a.spectrum = j.value("spectrum", a.spectrum);
    a.warp = j.value("warp", a.warp);
    a.m = j.value("m", a.m);
    a.gamma = j.value("gamma", a.gamma);
    a.s = j.value("s", a.s);
    a.p = j.value("p", a.p);
    a.q = j.value("q", a.q);
    a.horizon = j.value("T", a.horizon);
    a.dt = j.value("dt", a.dt);
    a.grid_min = j.value("grid_min", a.grid_min);
    a.t_max = j.value("t_max", a.t_max);
    a.grid_size = j.value("grid_size", a.grid_size);
    a.u0_constant = j.value("u0_constant", a.u0_constant);
  }
  PMEConfig c;
  c.model = {io::parse_spectrum(a.spectrum, 2), a.warp};
  c.m = a.m;
  c.gamma = a.gamma;
  c.s = a.s;
  c.p = a.p;
  c.q = a.q;
  c.horizon = a.horizon;
  c.dt = a.dt;
  c.grid = make_grid(a.grid_min, a.t_max, a.grid_size);
  c.u0 = a.u0_constant > 0.0 ? RVector::Constant(c.grid.size, a.u0_constant) : reference_data(c.grid);
  echo = {{"spectrum", a.spectrum}, {"warp", a.warp}, {"m", a.m}, {"gamma", a.gamma}, {"s", a.s}, {"p", a.p}, {"q", a.q},
          {"T", a.horizon}, {"dt", a.dt}, {"grid_min", a.grid_min}, {"t_max", a.t_max}, {"grid_size", a.grid_size},
          {"u0", a.u0_constant > 0.0 ? json(a.u0_constant) : json("reference")}};
  return c;
}

int cmd_pme(const Common& common, PmeArgs a) {
  json echo;
  const auto c = pme_config(a, echo);
  io::Manifest m{"pme", a.config.empty() ? std::vector<std::string>{} : std::vector<std::string>{a.config}, echo};
  const auto problems = validate(c);
  if (!problems.empty()) {
    emit(common, m, {{"valid", false}, {"violations", problems}});
    return 2;
  }
  const auto rep = solve(c, a.every);
  json out = {{"valid", true},
              {"positivity_ok", rep.positivity_ok},
              {"time_reached", rep.time_reached},
              {"steps", rep.steps},
              {"min_u", rep.min_u},
              {"max_residual", rep.max_residual},
              {"final_extension_coefficient", rep.trajectory.back().extension_coefficient}};
  if (!a.out.empty()) {
    std::ostringstream csv;
    csv << std::setprecision(17) << "# manifest: " << m.to_json().dump() << "\n";
    csv << "time";
    for (double t : c.grid.t) csv << ",u(" << t << ")";
    csv << "\n";
    for (const auto& st : rep.trajectory) {
      csv << st.time;
      for (Eigen::Index i = 0; i < st.u.size(); ++i) csv << "," << st.u(i);
      csv << "\n";
    }
    io::write_text(a.out, csv.str());
    out["csv"] = a.out;
  }
  emit(common, m, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cone-calc: conormal symbols, extension domains and cone Laplacian numerics"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--jobs", common.jobs, "parallel work items (0 = all cores)");
  app.add_flag("--timestamp", common.timestamp, "record the wall-clock time in the manifest");
  app.add_option("--report", common.report, "write the JSON report here instead of stdout");

  OperatorInput sym_in, dom_in;
  double sym_gamma = 0.0, dom_gamma = 0.0;
  int sym_depth = 2, sym_samples = 20;
  unsigned sym_seed = 1;
  auto* symbol = app.add_subcommand("symbol", "conormal sequence, poles and recursion identity");
  sym_in.attach(symbol);
  symbol->add_option("--gamma", sym_gamma, "weight");
  symbol->add_option("--depth", sym_depth, "recursion depth");
  symbol->add_option("--samples", sym_samples, "identity sample points");
  symbol->add_option("--seed", sym_seed, "sample seed");

  std::string dom_selection, dom_pairing = "closed", dom_direction = "forward";
  auto* domains = app.add_subcommand("domains", "asymptotic spaces, theta and complements");
  dom_in.attach(domains);
  domains->add_option("--gamma", dom_gamma, "weight");
  domains->add_option("--selection", dom_selection, "selection JSON (asymptotic space)");
  domains->add_option("--pairing", dom_pairing, "closed | quadrature")->check(CLI::IsMember({"closed", "quadrature"}));
  domains->add_option("--direction", dom_direction, "forward | inverse")->check(CLI::IsMember({"forward", "inverse"}));

  std::string lap_spectrum = "sphere:2";
  int lap_count = 3, lap_depth = 2;
  double lap_gamma = 0.2, lap_warp = 0.0;
  auto* laplacian = app.add_subcommand("laplacian", "q-poles, maximal domain, E_0 and the PME extension");
  laplacian->add_option("--spectrum", lap_spectrum, "circle:R | sphere:N | file.json");
  laplacian->add_option("--count", lap_count, "number of modes");
  laplacian->add_option("--gamma", lap_gamma, "weight");
  laplacian->add_option("--warp", lap_warp, "phi'(0)");
  laplacian->add_option("--taylor-depth", lap_depth, "Taylor depth of the warp");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "resolvent sweep, H-infinity probe, dilations");
  probe->add_option("--spectrum", pa.spectrum, "circle:R | sphere:N | file.json");
  probe->add_option("--count", pa.count, "number of modes");
  probe->add_option("--gamma", pa.gamma, "norm weight");
  probe->add_option("--warp", pa.warp, "phi'(0)");
  probe->add_flag("--frozen", pa.frozen, "freeze coefficients at t = 0");
  probe->add_option("--grid-min", pa.grid_min, "t_min");
  probe->add_option("--t-max", pa.t_max, "t_max");
  probe->add_option("--grid-size", pa.grid_size, "grid points");
  probe->add_option("--sector-angle", pa.sector_angle, "theta of Lambda(theta)");
  probe->add_option("--rays", pa.rays_pi, "ray arguments in units of pi, comma separated");
  auto* radii_opt = probe->add_option("--radii", pa.radii, "explicit |lambda| list, comma separated");
  probe->add_option("--r-min", pa.r_min, "smallest |lambda|");
  probe->add_option("--r-max", pa.r_max, "largest |lambda|");
  probe->add_option("--per-decade", pa.per_decade, "radii per decade");
  probe->add_option("--shift", pa.shift, "c in -Delta + c");
  probe->add_option("--norm-s", pa.norm_s, "log-derivative order of the norm");
  probe->add_flag("--hinfty", pa.hinfty, "run the H-infinity probe");
  probe->add_option("--dilation", pa.dilation, "grid shift for the dilation check (frozen only)");
  probe->add_option("--out", pa.out, "CSV of the sweep");

  PmeArgs pm;
  auto* pme = app.add_subcommand("pme", "porous medium equation run");
  pme->add_option("--config", pm.config, "config JSON");
  pme->add_option("--spectrum", pm.spectrum, "circle:R | sphere:N | file.json");
  pme->add_option("--warp", pm.warp, "phi'(0)");
  pme->add_option("--m", pm.m, "exponent");
  pme->add_option("--gamma", pm.gamma, "weight");
  pme->add_option("--s", pm.s, "smoothness index");
  pme->add_option("--p", pm.p, "space exponent");
  pme->add_option("--q", pm.q, "time exponent");
  pme->add_option("--T", pm.horizon, "horizon");
  pme->add_option("--dt", pm.dt, "time step");
  pme->add_option("--grid-min", pm.grid_min, "t_min");
  pme->add_option("--t-max", pm.t_max, "t_max");
  pme->add_option("--grid-size", pm.grid_size, "grid points");
  pme->add_option("--u0-constant", pm.u0_constant, "constant initial data (default: smooth reference profile)");
  pme->add_option("--every", pm.every, "trajectory output stride");
  pme->add_option("--out", pm.out, "trajectory CSV");

  for (auto* sub : {symbol, domains, laplacian, probe, pme}) {
    sub->add_option("--jobs", common.jobs, "parallel work items (0 = all cores)");
    sub->add_flag("--timestamp", common.timestamp, "record the wall-clock time in the manifest");
    sub->add_option("--report", common.report, "write the JSON report here instead of stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  pa.radii_given = radii_opt->count() > 0;

  try {
    if (*symbol) return cmd_symbol(common, sym_in, sym_gamma, sym_depth, sym_samples, sym_seed);
    if (*domains) return cmd_domains(common, dom_in, dom_gamma, dom_selection, dom_pairing, dom_direction);
    if (*laplacian) return cmd_laplacian(common, lap_spectrum, lap_count, lap_gamma, lap_warp, lap_depth);
    if (*probe) return cmd_probe(common, pa);
    if (*pme) return cmd_pme(common, pm);
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump() << "\n";
    return e.is_validation() ? 2 : 3;
  } catch (const json::exception& e) {
    std::cerr << json{{"error", "InvalidInput"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
