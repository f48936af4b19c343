#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "donorspin/donorspin.hpp"
#include "test_helpers.hpp"

using namespace donorspin;
using Catch::Approx;
using testutil::run_cli;
using testutil::tmp_path;
using testutil::write_file;

namespace {

CsvTable parse_output(const std::string& text) {
  std::istringstream is(text);
  return parse_csv(is, "cli-output");
}

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
  CHECK(run_cli("").exit_code == 2);                          // missing subcommand
  CHECK(run_cli("no-such-subcommand").exit_code == 2);        // unknown subcommand
  CHECK(run_cli("breit-rabi --no-such-flag").exit_code == 2); // unknown option
  CHECK(run_cli("fit-spectrum").exit_code == 2);              // missing required --input
  CHECK(run_cli("spectrum --mode xm").exit_code == 2);        // bad enum value
  CHECK(run_cli("breit-rabi --system neon").exit_code == 2);  // unknown preset
  CHECK(run_cli("breit-rabi --step -1").exit_code == 2);      // invalid range
}

TEST_CASE("help exits cleanly", "[cli]") {
  const auto r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("breit-rabi") != std::string::npos);
  CHECK(run_cli("spectrum --help").exit_code == 0);
}

TEST_CASE("missing input files exit with code 3", "[cli]") {
  CHECK(run_cli("fit-spectrum -i /nonexistent/trace.csv").exit_code == 3);
  CHECK(run_cli("fit-linewidth -i /nonexistent/data.csv").exit_code == 3);
  CHECK(run_cli("diffuse --d0 1e-12 --ea 1 --budget /nonexistent/budget.csv").exit_code == 3);
  const std::string garbled = tmp_path("cli_garbled.csv");
  write_file(garbled, "B0_mT,dBpp_mT,sigma_mT\n1,frog,0.01\n");
  CHECK(run_cli("fit-linewidth -i " + garbled).exit_code == 3);
}

TEST_CASE("numeric failures exit with code 4", "[cli]") {
  // A thermal budget needing more than the substep cap trips the numeric guard.
  CHECK(run_cli("diffuse --d0 10 --ea 0.5 --anneal 1200:3600").exit_code == 4);
}

TEST_CASE("breit-rabi emits a provenance header and the right grid", "[cli]") {
  const auto r = run_cli("breit-rabi --bmin 0 --bmax 1 --step 0.5 --seed 42");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.rows.size() == 3);
  REQUIRE(t.header.size() == 9);  // B0 + 8 levels
  CHECK(t.header[0] == "B0_mT");

  // Provenance: first comment is '# {json}' carrying tool, version, seed.
  REQUIRE_FALSE(t.comments.empty());
  const auto j = nlohmann::json::parse(t.comments[0]);
  CHECK(j["tool"] == "breit-rabi");
  CHECK(j["seed"] == 42);
  CHECK(j.contains("content_hash"));

  // Energies match a direct library call.
  const EigenSolution sol = solve_at_field(as75(), 0.5);
  for (int k = 0; k < 8; ++k) CHECK(t.rows[1][k + 1] == Approx(sol.energies[k]).margin(1e-9));
}

TEST_CASE("transitions table matches the library", "[cli]") {
  const auto r = run_cli("transitions --field 2.0");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.rows.size() == 28);
  const auto table = transition_table(as75(), 2.0);
  const std::size_t f_col = t.column("f_MHz"), s_col = t.column("strength");
  for (std::size_t k = 0; k < 28; ++k) {
    CHECK(t.rows[k][f_col] == Approx(table[k].f).margin(1e-8));
    CHECK(t.rows[k][s_col] == Approx(table[k].strength).margin(1e-10));
  }
}

TEST_CASE("ct-find reports the two clock transitions", "[cli]") {
  const auto r = run_cli("ct-find");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][t.column("B_star_mT")] == Approx(3.79653).margin(1e-4));
  CHECK(t.rows[1][t.column("B_star_mT")] == Approx(3.80416).margin(1e-4));
}

TEST_CASE("output file writing matches stdout", "[cli]") {
  const std::string path = tmp_path("cli_out.csv");
  const auto to_file = run_cli("ct-find -o " + path);
  REQUIRE(to_file.exit_code == 0);
  CHECK(to_file.out.empty());
  const auto to_stdout = run_cli("ct-find");
  CHECK(testutil::read_file(path) == to_stdout.out);
}

TEST_CASE("config file supplies defaults and flags win", "[cli]") {
  const std::string cfg = tmp_path("cli_cfg.ini");
  write_file(cfg, "bmin=0\nbmax=2\nstep=1\n");
  const auto from_cfg = run_cli("breit-rabi --config " + cfg);
  REQUIRE(from_cfg.exit_code == 0);
  CHECK(parse_output(from_cfg.out).rows.size() == 3);

  // Command-line value overrides the config file.
  const auto overridden = run_cli("breit-rabi --config " + cfg + " --step 0.5");
  REQUIRE(overridden.exit_code == 0);
  CHECK(parse_output(overridden.out).rows.size() == 5);

  CHECK(run_cli("breit-rabi --config /nonexistent.ini").exit_code == 2);
}

TEST_CASE("spin systems load from a parameter file", "[cli]") {
  const std::string sysfile = tmp_path("cli_sys.cfg");
  write_file(sysfile,
             "name = Custom\nS = 0.5\nI = 0\nA_MHz = 0\ng_e = 2.0023\ng_n = 0\n");
  const auto r = run_cli("breit-rabi --system-file " + sysfile + " --bmin 1 --bmax 1 --step 1");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.header.size() == 3);  // two-level system
  const double split = t.rows[0][2] - t.rows[0][1];
  CHECK(split == Approx(2.0023 * constants::mu_B_over_h).epsilon(1e-10));

  write_file(sysfile, "name = Broken\nS = 0.5\n");
  CHECK(run_cli("breit-rabi --system-file " + sysfile).exit_code == 2);
}

TEST_CASE("spectrum output feeds back into fit-spectrum", "[cli]") {
  const std::string trace = tmp_path("cli_trace.csv");
  const auto sim = run_cli(
      "spectrum --system pb0 --rf 100 --mode fm --mod-amplitude 0.5 --gamma 1 "
      "--bmin 3.0 --bmax 4.2 --step 0.005 -o " + trace);
  REQUIRE(sim.exit_code == 0);

  const auto fit = run_cli("fit-spectrum -i " + trace + " -n 1");
  REQUIRE(fit.exit_code == 0);
  const CsvTable t = parse_output(fit.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][t.column("center_mT")] == Approx(3.5724).margin(0.01));
}

TEST_CASE("fit-linewidth round-trips synthetic model data", "[cli]") {
  // Generate clean quadrature-model widths over the clock-transition branch.
  const SpinSystem sys = as75();
  const CtPairPolicy policy = make_ct_pair_policy(sys);
  const LinewidthModel truth{0.1, 0.26, 0.5, CombineMode::Quadrature};
  std::ostringstream os;
  os << "B0_mT,dBpp_mT,sigma_mT\n";
  for (int k = 0; k < 15; ++k) {
    const double B = 1.0 + 5.0 * k / 14.0;
    const double w = predict_linewidth_ct(truth, sys, policy, B);
    os << format_g(B) << "," << format_g(w) << "," << format_g(0.05 * w) << "\n";
  }
  const std::string data = tmp_path("cli_widths.csv");
  write_file(data, os.str());

  const auto r = run_cli("fit-linewidth -i " + data + " --combine quadrature --mod-amplitude 0.5");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][t.column("delta_B0_mT")] == Approx(0.1).epsilon(0.01));
  CHECK(t.rows[0][t.column("delta_A_MHz")] == Approx(0.26).epsilon(0.01));
  CHECK(t.rows[0][t.column("strain")] == Approx(6.86e-5).epsilon(0.02));
}

TEST_CASE("diffuse emits profile, dose, and crossing annotations", "[cli]") {
  const std::string budget = tmp_path("cli_budget.csv");
  write_file(budget, "T_C,duration_s\n950,300\n950,300\n");
  const auto r = run_cli("diffuse --length 300 --dx 0.5 --surface 1e20 --budget " + budget +
                         " --d0 8.8e-11 --ea 1.0 --marker 25:7.8e18");
  REQUIRE(r.exit_code == 0);
  const CsvTable t = parse_output(r.out);
  REQUIRE(t.rows.size() == 601);
  CHECK(t.header[0] == "x_nm");
  bool has_dose = false, has_mit = false, has_marker = false;
  for (const auto& c : t.comments) {
    has_dose = has_dose || c.rfind("dose_cm2", 0) == 0;
    has_mit = has_mit || c.rfind("mit_depth_nm", 0) == 0;
    has_marker = has_marker || c.rfind("marker", 0) == 0;
  }
  CHECK(has_dose);
  CHECK(has_mit);
  CHECK(has_marker);
  // Profile decreases away from the fixed source.
  CHECK(t.rows[0][1] == Approx(1e20));
  CHECK(t.rows[200][1] < t.rows[50][1]);
}

TEST_CASE("seed is echoed in provenance for every subcommand", "[cli]") {
  for (const std::string& cmd : {std::string("ct-find --seed 7"), std::string("transitions --seed 7 --field 1")}) {
    const auto r = run_cli(cmd);
    REQUIRE(r.exit_code == 0);
    const CsvTable t = parse_output(r.out);
    const auto j = nlohmann::json::parse(t.comments[0]);
    CHECK(j["seed"] == 7);
  }
}
