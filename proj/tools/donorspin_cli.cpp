// Command-line front end for the donor spin toolkit.
//
// Exit codes: 0 success, 2 usage or parameter error, 3 input-file error,
// 4 numerical failure.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "donorspin/donorspin.hpp"

namespace {

using namespace donorspin;

struct GlobalOpts {
  std::string system = "as75";
  std::string system_file;
  std::string out = "-";
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

SpinSystem resolve_system(const GlobalOpts& g) {
  if (!g.system_file.empty()) return spin_system_from_kv(read_kv_file(g.system_file));
  if (g.system == "as75") return as75();
  if (g.system == "pb0") return pb0();
  throw std::invalid_argument("unknown system preset '" + g.system + "' (use as75, pb0, or --system-file)");
}

void emit(const GlobalOpts& g, const std::string& doc) {
  if (g.out == "-")
    std::cout << doc;
  else
    write_text_file(g.out, doc);
}

void add_common(CLI::App* sub, GlobalOpts& g) {
  sub->add_option("--system", g.system, "Spin-system preset: as75 or pb0")->capture_default_str();
  sub->add_option("--system-file", g.system_file, "Spin-system parameter file (key = value)")
      ->excludes("--system");
  sub->add_option("-o,--out", g.out, "Output path ('-' for stdout)")->capture_default_str();
  sub->add_option("--seed", g.seed, "RNG seed, echoed into the output provenance header");
  sub->add_option("--config", g.config_path,
                  "Read option defaults from a key = value file (explicit flags win)");
}

// Expands "--config FILE" into "--key=value" tokens inserted right after the
// subcommand name, skipping keys the user already passed explicitly. Returns
// the rewritten argument list in normal (not reversed) order.
std::vector<std::string> inject_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  std::size_t sub_pos = args.size();
  for (std::size_t k = 0; k < args.size(); ++k) {
    const std::string& a = args[k];
    if (sub_pos == args.size() && !a.empty() && a[0] != '-') sub_pos = k;
    if (a == "--config" && k + 1 < args.size())
      config_path = args[k + 1];
    else if (a.rfind("--config=", 0) == 0)
      config_path = a.substr(9);
  }
  if (config_path.empty() || sub_pos == args.size()) return args;

  std::map<std::string, std::string> kv;
  try {
    kv = donorspin::read_kv_file(config_path);
  } catch (const donorspin::IngestError& e) {
    // Config problems are command-line usage errors, not data-ingestion ones.
    throw std::invalid_argument(e.what());
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + key;
    bool given = false;
    for (std::size_t k = sub_pos + 1; k < args.size() && !given; ++k)
      given = args[k] == flag || args[k].rfind(flag + "=", 0) == 0;
    if (!given) injected.push_back(flag + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1,
              injected.begin(), injected.end());
  return args;
}

std::pair<int, int> parse_pair(const std::string& s, const std::string& what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument(what + ": expected i:j");
  try {
    const int i = std::stoi(s.substr(0, colon));
    const int j = std::stoi(s.substr(colon + 1));
    return {i, j};
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": expected integer i:j, got '" + s + "'");
  }
}

std::vector<double> parse_fields(const std::string& s, std::size_t min_n, std::size_t max_n,
                                 const std::string& what) {
  std::vector<double> out;
  std::string cell;
  std::istringstream is(s);
  while (std::getline(is, cell, ':')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size())
      throw std::invalid_argument(what + ": cannot parse '" + cell + "'");
    out.push_back(v);
  }
  if (out.size() < min_n || out.size() > max_n)
    throw std::invalid_argument(what + ": expected " + std::to_string(min_n) + ".." + std::to_string(max_n) +
                                " colon-separated values");
  return out;
}

nlohmann::json system_json(const SpinSystem& sys) {
  return {{"name", sys.name}, {"S", sys.S}, {"I", sys.I}, {"A_MHz", sys.A}, {"g_e", sys.g_e}, {"g_n", sys.g_n}};
}

// ---------------------------------------------------------------- breit-rabi

struct BreitRabiOpts {
  GlobalOpts g;
  double bmin = 0.0, bmax = 10.0, step = 0.01;
};

void run_breit_rabi(const BreitRabiOpts& o) {
  const SpinSystem sys = resolve_system(o.g);
  const OperatorSet ops = operator_set(sys);
  if (!(o.step > 0.0) || !(o.bmax >= o.bmin)) throw std::invalid_argument("breit-rabi: need step > 0 and bmax >= bmin");
  std::vector<std::string> header{"B0_mT"};
  for (int k = 1; k <= ops.dim; ++k) header.push_back("E_" + std::to_string(k) + "_MHz");
  std::vector<std::vector<double>> rows;
  const int n = static_cast<int>(std::floor((o.bmax - o.bmin) / o.step + 1e-9)) + 1;
  for (int m = 0; m < n; ++m) {
    const double B = o.bmin + m * o.step;
    const EigenSolution sol = solve_at_field(sys, ops, B);
    std::vector<double> row{B};
    for (int k = 0; k < ops.dim; ++k) row.push_back(sol.energies[k]);
    rows.push_back(std::move(row));
  }
  Provenance prov{"breit-rabi",
                  {{"system", system_json(sys)}, {"bmin_mT", o.bmin}, {"bmax_mT", o.bmax}, {"step_mT", o.step}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows));
}

// --------------------------------------------------------------- transitions

struct TransitionsOpts {
  GlobalOpts g;
  double field = 3.8;
  std::optional<double> bmin, bmax;
  double step = 0.1;
  double threshold = default_strength_threshold;
};

void run_transitions(const TransitionsOpts& o) {
  const SpinSystem sys = resolve_system(o.g);
  const OperatorSet ops = operator_set(sys);
  std::vector<double> fields;
  if (o.bmin && o.bmax) {
    if (!(o.step > 0.0) || !(*o.bmax >= *o.bmin)) throw std::invalid_argument("transitions: bad sweep range");
    const int n = static_cast<int>(std::floor((*o.bmax - *o.bmin) / o.step + 1e-9)) + 1;
    for (int m = 0; m < n; ++m) fields.push_back(*o.bmin + m * o.step);
  } else {
    fields.push_back(o.field);
  }
  const std::vector<std::string> header{"B0_mT", "i", "j", "f_MHz", "strength", "dfdB_MHz_per_mT", "dfdA", "allowed"};
  std::vector<std::vector<double>> rows;
  for (double B : fields) {
    const EigenSolution sol = solve_at_field(sys, ops, B);
    for (const Transition& t : transition_table(sys, ops, sol, o.threshold))
      rows.push_back({B, double(t.i), double(t.j), t.f, t.strength, t.dfdB, t.dfdA, t.allowed ? 1.0 : 0.0});
  }
  Provenance prov{"transitions",
                  {{"system", system_json(sys)},
                   {"fields_mT", fields},
                   {"strength_threshold", o.threshold}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows));
}

// ------------------------------------------------------------------- ct-find

struct CtFindOpts {
  GlobalOpts g;
  double bmin = 0.5, bmax = 10.0;
  double grid_step = 0.01;
  double threshold = default_strength_threshold;
};

void run_ct_find(const CtFindOpts& o) {
  const SpinSystem sys = resolve_system(o.g);
  ClockSearchOptions cso;
  cso.grid_step = o.grid_step;
  cso.threshold = o.threshold;
  const auto cts = find_clock_transitions(sys, o.bmin, o.bmax, cso);
  const std::vector<std::string> header{"i", "j", "B_star_mT", "f_star_MHz", "curvature_MHz_per_mT2"};
  std::vector<std::vector<double>> rows;
  for (const auto& ct : cts)
    rows.push_back({double(ct.i), double(ct.j), ct.B_star, ct.f_star, ct.curvature});
  Provenance prov{"ct-find",
                  {{"system", system_json(sys)},
                   {"bmin_mT", o.bmin},
                   {"bmax_mT", o.bmax},
                   {"grid_step_mT", o.grid_step},
                   {"strength_threshold", o.threshold}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows));
}

// ------------------------------------------------------------------ spectrum

struct SpectrumOpts {
  GlobalOpts g;
  double rf = 383.0;
  std::string mode = "fm";
  double mod_amplitude = 0.1;
  double gamma = 1.0;
  double bmin = 0.5, bmax = 10.0, step = 0.01;
  int harmonic = 1;
  double threshold = default_strength_threshold;
  bool components = false;
  bool full_rediag = false;
};

void run_spectrum(const SpectrumOpts& o) {
  const SpinSystem sys = resolve_system(o.g);
  SpectrumConfig cfg;
  cfg.rf_freq = o.rf;
  if (o.mode == "fm")
    cfg.mode = ModMode::FM;
  else if (o.mode == "bm")
    cfg.mode = ModMode::BM;
  else
    throw std::invalid_argument("spectrum: mode must be fm or bm");
  cfg.mod_amplitude = o.mod_amplitude;
  cfg.gamma = o.gamma;
  cfg.harmonic = o.harmonic;
  cfg.strength_threshold = o.threshold;
  cfg.keep_components = o.components;
  cfg.full_rediagonalization = o.full_rediag;
  if (!(o.step > 0.0) || !(o.bmax >= o.bmin)) throw std::invalid_argument("spectrum: bad field range");
  const int n = static_cast<int>(std::floor((o.bmax - o.bmin) / o.step + 1e-9)) + 1;
  for (int m = 0; m < n; ++m) cfg.B_grid.push_back(o.bmin + m * o.step);

  const Spectrum spec = simulate_spectrum(sys, cfg);
  std::vector<std::string> header{"B_mT", "signal"};
  for (const auto& lbl : spec.component_labels) header.push_back("c_" + lbl);
  std::vector<std::vector<double>> rows;
  for (std::size_t m = 0; m < spec.B_grid.size(); ++m) {
    std::vector<double> row{spec.B_grid[m], spec.signal[m]};
    for (std::size_t c = 0; c < spec.component_labels.size(); ++c) row.push_back(spec.components[c][m]);
    rows.push_back(std::move(row));
  }
  Provenance prov{"spectrum",
                  {{"system", system_json(sys)},
                   {"rf_MHz", o.rf},
                   {"mode", o.mode},
                   {"mod_amplitude", o.mod_amplitude},
                   {"gamma_MHz", o.gamma},
                   {"bmin_mT", o.bmin},
                   {"bmax_mT", o.bmax},
                   {"step_mT", o.step},
                   {"harmonic", o.harmonic},
                   {"strength_threshold", o.threshold},
                   {"full_rediagonalization", o.full_rediag}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows));
}

// -------------------------------------------------------------- fit-spectrum

struct FitSpectrumOpts {
  GlobalOpts g;
  std::string input;
  int n_peaks = 1;
  std::vector<std::string> exclude;  // lo:hi windows for background subtraction
  std::vector<std::string> guesses;  // center:gamma:amplitude[:skew]
  bool assign = false;
  double rf = 383.0;
  double window = 0.3;
  double grid_step = 0.005;
  std::optional<std::string> ct_pair_spec;  // "i:j,i:j" below,above
};

void run_fit_spectrum(const FitSpectrumOpts& o) {
  Trace trace = read_trace(o.input);
  std::vector<std::pair<double, double>> windows;
  for (const auto& w : o.exclude) {
    const auto v = parse_fields(w, 2, 2, "--exclude");
    windows.emplace_back(v[0], v[1]);
  }
  if (!windows.empty()) trace = subtract_background(trace, windows);
  std::vector<PeakModel> guesses;
  for (const auto& gtext : o.guesses) {
    const auto v = parse_fields(gtext, 3, 4, "--guess");
    PeakModel m;
    m.center = v[0];
    m.gamma = v[1];
    m.amplitude = std::abs(v[2]);
    m.phase_sign = v[2] >= 0.0 ? +1 : -1;
    m.skew = v.size() > 3 ? v[3] : 0.0;
    guesses.push_back(m);
  }
  const PeakFitResult fit = fit_peaks(trace, o.n_peaks, guesses);

  std::vector<Assignment> assignments;
  if (o.assign) {
    const SpinSystem sys = resolve_system(o.g);
    AssignOptions ao;
    ao.window = o.window;
    ao.B_min = std::max(trace.B.front() - 0.5, 1e-3);
    ao.B_max = trace.B.back() + 0.5;
    ao.grid_step = o.grid_step;
    if (o.ct_pair_spec) {
      const auto comma = o.ct_pair_spec->find(',');
      if (comma == std::string::npos) throw std::invalid_argument("--ct-pair: expected ibelow:jbelow,iabove:jabove");
      ao.ct_pair = {{parse_pair(o.ct_pair_spec->substr(0, comma), "--ct-pair")},
                    {parse_pair(o.ct_pair_spec->substr(comma + 1), "--ct-pair")}};
      const auto cts = find_clock_transitions(sys, ao.B_min, ao.B_max, {});
      double split = 0.0;
      if (cts.size() >= 2) split = 0.5 * (cts[0].B_star + cts[1].B_star);
      ao.ct_split = split;
    }
    assignments = assign_transitions(fit, sys, o.rf, ao);
  }

  std::vector<std::string> header{"peak",          "center_mT",  "err_center_mT", "gamma_mT",
                                  "err_gamma_mT",  "amplitude",  "err_amplitude", "skew",
                                  "err_skew",      "phase_sign", "dBpp_mT"};
  if (o.assign) {
    header.insert(header.end(), {"i", "j", "predicted_B_mT", "mismatch_mT", "assigned"});
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < fit.peaks.size(); ++k) {
    const auto& p = fit.peaks[k];
    const auto& u = fit.uncertainties[k];
    std::vector<double> row{double(k), p.center, u[0],     p.gamma,           u[1], p.amplitude,
                            u[2],      p.skew,   u[3],     double(p.phase_sign), fit.dBpp[k]};
    if (o.assign) {
      const auto& a = assignments[k];
      row.insert(row.end(), {double(a.i), double(a.j), a.predicted_B, a.mismatch, a.assigned ? 1.0 : 0.0});
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> comments;
  comments.push_back("residual_norm = " + format_g(fit.residual_norm));
  comments.push_back(std::string("converged = ") + (fit.converged ? "1" : "0"));
  if (fit.degenerate) comments.push_back("degenerate = 1");
  for (const auto& w : fit.warnings) comments.push_back("warning: " + w);
  nlohmann::json cfg{{"input", o.input}, {"n_peaks", o.n_peaks}, {"assign", o.assign}};
  if (o.assign) cfg["rf_MHz"] = o.rf;
  Provenance prov{"fit-spectrum", cfg, o.g.seed};
  emit(o.g, csv_document(prov, header, rows, comments));
  if (!fit.converged) throw NumericError("fit-spectrum: least-squares fit did not converge");
}

// ------------------------------------------------------------- fit-linewidth

struct FitLinewidthOpts {
  GlobalOpts g;
  std::string input;
  std::string combine = "quadrature";
  std::optional<std::string> pair_spec;
  double kappa = 19.1;
  double mod_amplitude = 0.0;  // known modulation contribution (MHz), held fixed
};

void run_fit_linewidth(const FitLinewidthOpts& o) {
  const SpinSystem sys = resolve_system(o.g);
  const CsvTable t = read_csv(o.input);
  if (t.header.size() < 3) throw IngestError(o.input + ": need columns B0_mT,dBpp_mT,sigma_mT");
  LinewidthData data;
  for (const auto& row : t.rows) {
    data.B0.push_back(row[0]);
    data.dBpp.push_back(row[1]);
    data.sigma.push_back(row[2]);
  }
  CombineMode combine;
  if (o.combine == "linear")
    combine = CombineMode::Linear;
  else if (o.combine == "quadrature")
    combine = CombineMode::Quadrature;
  else
    throw std::invalid_argument("fit-linewidth: combine must be linear or quadrature");

  LinewidthFit fit;
  if (o.pair_spec) {
    const auto [i, j] = parse_pair(*o.pair_spec, "--pair");
    fit = fit_linewidth_model(data, sys, i, j, combine, o.mod_amplitude);
  } else {
    const CtPairPolicy policy = make_ct_pair_policy(sys);
    fit = fit_linewidth_model(data, sys, policy, combine, o.mod_amplitude);
  }
  const double strain = strain_from_deltaA(fit.delta_A, sys.A, o.kappa);
  const double err_strain = strain_from_deltaA(fit.err_delta_A, sys.A, o.kappa);

  const std::vector<std::string> header{"delta_B0_mT", "err_delta_B0_mT", "delta_A_MHz", "err_delta_A_MHz",
                                        "strain",      "err_strain",      "residual_norm"};
  const std::vector<std::vector<double>> rows{
      {fit.delta_B0, fit.err_delta_B0, fit.delta_A, fit.err_delta_A, strain, err_strain, fit.residual_norm}};
  Provenance prov{"fit-linewidth",
                  {{"system", system_json(sys)},
                   {"input", o.input},
                   {"combine", o.combine},
                   {"kappa", o.kappa},
                   {"pair", o.pair_spec ? *o.pair_spec : std::string("ct-policy")}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows));
  if (!fit.converged) throw NumericError("fit-linewidth: optimizer did not converge");
}

// ------------------------------------------------------------------- diffuse

struct DiffuseOpts {
  GlobalOpts g;
  double length = 150.0, dx = 0.5;
  double surface = 1e20, depth = 0.0;
  std::string budget_file;
  std::vector<std::string> anneals;  // T_C:duration_s inline steps
  double d0 = 0.0, ea = 0.0;
  double threshold = 7.8e18;
  std::vector<std::string> markers;  // depth:concentration reference points
};

void run_diffuse(const DiffuseOpts& o) {
  DiffusivityModel model{o.d0, o.ea};
  model.validate();
  std::vector<ThermalStep> steps;
  if (!o.budget_file.empty()) {
    const CsvTable t = read_csv(o.budget_file);
    if (t.header.size() < 2) throw IngestError(o.budget_file + ": need columns T_C,duration_s");
    for (const auto& row : t.rows) steps.push_back(thermal_step_celsius(row[0], row[1]));
  }
  for (const auto& a : o.anneals) {
    const auto v = parse_fields(a, 2, 2, "--anneal");
    steps.push_back(thermal_step_celsius(v[0], v[1]));
  }
  if (steps.empty()) throw std::invalid_argument("diffuse: no thermal steps (use --budget or --anneal)");

  ConcentrationProfile initial = make_step_profile(o.length, o.dx, o.surface, o.depth);
  const ConcentrationProfile result = diffuse(initial, steps, model);

  std::vector<std::string> comments;
  comments.push_back("dose_cm2 = " + format_g(dose_cm2(result)));
  const auto depth = mit_crossing_depth(result, o.threshold);
  comments.push_back("mit_threshold_cm3 = " + format_g(o.threshold));
  comments.push_back("mit_depth_nm = " + (depth ? format_g(*depth) : std::string("none")));
  for (const auto& mtext : o.markers) {
    const auto v = parse_fields(mtext, 2, 2, "--marker");
    ReferenceMarker m{v[0], v[1], ""};
    m.validate();
    comments.push_back("marker depth_nm = " + format_g(m.depth_nm) +
                       " concentration_cm3 = " + format_g(m.concentration_cm3));
  }
  const std::vector<std::string> header{"x_nm", "C_cm3"};
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < result.c.size(); ++k) rows.push_back({result.depth_nm(k), result.c[k]});
  Provenance prov{"diffuse",
                  {{"length_nm", o.length},
                   {"dx_nm", o.dx},
                   {"surface_cm3", o.surface},
                   {"source_depth_nm", o.depth},
                   {"D0_cm2_s", o.d0},
                   {"Ea_eV", o.ea},
                   {"mit_threshold_cm3", o.threshold},
                   {"steps", steps.size()}},
                  o.g.seed};
  emit(o.g, csv_document(prov, header, rows, comments));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Donor electron-nuclear spin toolkit: level structure, transition spectra, "
               "clock-transition search, lock-in spectra, linewidth models, peak fitting, "
               "and dopant diffusion"};
  app.require_subcommand(1);

  BreitRabiOpts br;
  auto* sub_br = app.add_subcommand("breit-rabi", "Eigenenergies versus magnetic field");
  sub_br->add_option("--bmin", br.bmin, "Sweep start (mT)")->capture_default_str();
  sub_br->add_option("--bmax", br.bmax, "Sweep end (mT)")->capture_default_str();
  sub_br->add_option("--step", br.step, "Sweep step (mT)")->capture_default_str();
  add_common(sub_br, br.g);
  sub_br->callback([&br] { run_breit_rabi(br); });

  TransitionsOpts tr;
  auto* sub_tr = app.add_subcommand("transitions", "Transition table at fixed field(s)");
  sub_tr->add_option("--field", tr.field, "Field (mT)")->capture_default_str();
  sub_tr->add_option("--bmin", tr.bmin, "Sweep start (mT); with --bmax, overrides --field");
  sub_tr->add_option("--bmax", tr.bmax, "Sweep end (mT)");
  sub_tr->add_option("--step", tr.step, "Sweep step (mT)")->capture_default_str();
  sub_tr->add_option("--threshold", tr.threshold, "Allowed-transition strength threshold")->capture_default_str();
  add_common(sub_tr, tr.g);
  sub_tr->callback([&tr] { run_transitions(tr); });

  CtFindOpts ct;
  auto* sub_ct = app.add_subcommand("ct-find", "Locate magnetic clock transitions (df/dB = 0)");
  sub_ct->add_option("--bmin", ct.bmin, "Search start (mT)")->capture_default_str();
  sub_ct->add_option("--bmax", ct.bmax, "Search end (mT)")->capture_default_str();
  sub_ct->add_option("--grid-step", ct.grid_step, "Bracketing grid step (mT)")->capture_default_str();
  sub_ct->add_option("--threshold", ct.threshold, "Allowed-transition strength threshold")->capture_default_str();
  add_common(sub_ct, ct.g);
  sub_ct->callback([&ct] { run_ct_find(ct); });

  SpectrumOpts sp;
  auto* sub_sp = app.add_subcommand("spectrum", "Lock-in demodulated spectrum versus field");
  sub_sp->add_option("--rf", sp.rf, "Carrier frequency (MHz)")->capture_default_str();
  sub_sp->add_option("--mode", sp.mode, "Modulation mode: fm or bm")->capture_default_str();
  sub_sp->add_option("--mod-amplitude", sp.mod_amplitude, "Modulation amplitude (MHz for fm, mT for bm)")
      ->capture_default_str();
  sub_sp->add_option("--gamma", sp.gamma, "Lorentzian half-width (MHz)")->capture_default_str();
  sub_sp->add_option("--bmin", sp.bmin, "Sweep start (mT)")->capture_default_str();
  sub_sp->add_option("--bmax", sp.bmax, "Sweep end (mT)")->capture_default_str();
  sub_sp->add_option("--step", sp.step, "Sweep step (mT)")->capture_default_str();
  sub_sp->add_option("--harmonic", sp.harmonic, "Demodulation harmonic")->capture_default_str();
  sub_sp->add_option("--threshold", sp.threshold, "Allowed-transition strength threshold")->capture_default_str();
  sub_sp->add_flag("--components", sp.components, "Emit one column per contributing transition");
  sub_sp->add_flag("--full-rediag", sp.full_rediag, "Re-diagonalize at every modulated field sample (bm only)");
  add_common(sub_sp, sp.g);
  sub_sp->callback([&sp] { run_spectrum(sp); });

  FitSpectrumOpts fs;
  auto* sub_fs = app.add_subcommand("fit-spectrum", "Fit derivative peaks in a measured trace");
  sub_fs->add_option("-i,--input", fs.input, "Trace CSV (field, signal)")->required();
  sub_fs->add_option("-n,--n-peaks", fs.n_peaks, "Number of peaks to fit")->capture_default_str();
  sub_fs->add_option("--exclude", fs.exclude,
                     "Background exclusion window lo:hi (mT); enables spline background subtraction");
  sub_fs->add_option("--guess", fs.guesses, "Initial peak center:gamma:amplitude[:skew]");
  sub_fs->add_flag("--assign", fs.assign, "Match fitted centers to spin-system transitions");
  sub_fs->add_option("--rf", fs.rf, "Carrier frequency for assignment (MHz)")->capture_default_str();
  sub_fs->add_option("--window", fs.window, "Assignment acceptance window (mT)")->capture_default_str();
  sub_fs->add_option("--grid-step", fs.grid_step, "Assignment search grid step (mT)")->capture_default_str();
  sub_fs->add_option("--ct-pair", fs.ct_pair_spec,
                     "Clock-transition branch pairs 'ibelow:jbelow,iabove:jabove' for assignment");
  add_common(sub_fs, fs.g);
  sub_fs->callback([&fs] { run_fit_spectrum(fs); });

  FitLinewidthOpts fl;
  auto* sub_fl = app.add_subcommand("fit-linewidth", "Fit the two-parameter linewidth model to data");
  sub_fl->add_option("-i,--input", fl.input, "Data CSV (B0_mT, dBpp_mT, sigma_mT)")->required();
  sub_fl->add_option("--combine", fl.combine, "Term combination: linear or quadrature")->capture_default_str();
  sub_fl->add_option("--pair", fl.pair_spec, "Fixed transition pair i:j (default: clock-transition branch policy)");
  sub_fl->add_option("--kappa", fl.kappa, "Hyperfine-to-strain conversion factor")->capture_default_str();
  sub_fl->add_option("--mod-amplitude", fl.mod_amplitude, "Known modulation broadening term (MHz), held fixed")
      ->capture_default_str();
  add_common(sub_fl, fl.g);
  sub_fl->callback([&fl] { run_fit_linewidth(fl); });

  DiffuseOpts df;
  auto* sub_df = app.add_subcommand("diffuse", "Evolve a dopant profile through a thermal budget");
  sub_df->add_option("--length", df.length, "Domain length (nm)")->capture_default_str();
  sub_df->add_option("--dx", df.dx, "Grid spacing (nm)")->capture_default_str();
  sub_df->add_option("--surface", df.surface, "Source concentration (cm^-3)")->capture_default_str();
  sub_df->add_option("--source-depth", df.depth, "Initial box depth of the source layer (nm)")->capture_default_str();
  sub_df->add_option("--budget", df.budget_file, "Thermal budget CSV (T_C, duration_s)");
  sub_df->add_option("--anneal", df.anneals, "Inline thermal step T_C:duration_s");
  sub_df->add_option("--d0", df.d0, "Arrhenius prefactor D0 (cm^2/s)")->required();
  sub_df->add_option("--ea", df.ea, "Activation energy (eV)")->required();
  sub_df->add_option("--threshold", df.threshold, "Metal-insulator threshold concentration (cm^-3)")
      ->capture_default_str();
  sub_df->add_option("--marker", df.markers, "Reference marker depth_nm:concentration_cm3");
  add_common(sub_df, df.g);
  sub_df->callback([&df] { run_diffuse(df); });

  try {
    std::vector<std::string> args = inject_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11's vector overload pops from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const donorspin::IngestError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const donorspin::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
