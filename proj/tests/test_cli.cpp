#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "oseen/cli.hpp"
#include "oseen/errors.hpp"
#include "oseen/spectrum.hpp"

using namespace oseen;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path test_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "oseen_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path case_dir(const std::string& name) {
  fs::path p = test_root() / name;
  fs::create_directories(p);
  return p;
}

void write_config(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CliResult {
  int exit = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_log.txt";
  const std::string cmd = std::string(OSEEN_CLI_PATH) + " " + args + " >'" +
                          log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  CliResult r;
  if (WIFEXITED(rc)) r.exit = WEXITSTATUS(rc);
  r.output = slurp(log);
  return r;
}

int lines_of(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// error expecting helper: checks class, kind and message fragments
template <typename Fn>
void expect_config_error(Fn&& fn, const std::string& fragment) {
  try {
    fn();
    const std::string missed = "expected ConfigError containing '" +
                               fragment + "'";
    CHECK_MESSAGE(false, missed);
  } catch (const error& e) {
    CHECK(e.code() == errc::config);
    CHECK(e.kind() == "ConfigError");
    const std::string got = std::string("message was: ") + e.what();
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos,
                  got);
  }
}

}  // namespace

TEST_SUITE("cli") {

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

TEST_CASE("empty and minimal configs resolve to the documented defaults") {
  const RunConfig d = parse_config("");
  CHECK(d.nu == 0.002);
  CHECK(d.a == 1.0);
  CHECK(d.M == 64);
  CHECK(d.M_x == 3);
  CHECK(d.alpha0 == 1.0);
  CHECK(d.variant == "complex");
  CHECK(d.T == 20.0);
  CHECK(d.dt == 0.01);
  CHECK(d.J == 40);
  CHECK(d.seed == 0);
  CHECK(d.output_dir == ".");

  const RunConfig m = parse_config("nu = 0.01\na = 1.0");
  CHECK(m.nu == 0.01);
  CHECK(m.a == 1.0);
  CHECK(m.M == 64);  // defaults still applied
}

TEST_CASE("every key parses with comments, quotes, and odd spacing") {
  const RunConfig c = parse_config(
      "# full configuration\n"
      "nu = 0.004   # viscosity\n"
      "a=2.5\n"
      "  M   =  96\n"
      "M_x = 2\n"
      "alpha0 = 10.0\n"
      "variant = \"restricted(1)\"\n"
      "T = 12.5\n"
      "dt = 0.25\n"
      "J = 17\n"
      "seed = -42\n"
      "output_dir = \"runs/a b\"\n"
      "\n");
  CHECK(c.nu == 0.004);
  CHECK(c.a == 2.5);
  CHECK(c.M == 96);
  CHECK(c.M_x == 2);
  CHECK(c.alpha0 == 10.0);
  CHECK(c.variant == "restricted(1)");
  CHECK(c.T == 12.5);
  CHECK(c.dt == 0.25);
  CHECK(c.J == 17);
  CHECK(c.seed == -42);
  CHECK(c.output_dir == "runs/a b");
}

TEST_CASE("config rejections carry line and column positions") {
  expect_config_error([] { parse_config("M = 4"); }, "'M' must be at least 8");
  expect_config_error([] { parse_config("M = 4"); }, "line 1, column 5");

  expect_config_error([] { parse_config("nu = 0.01\nnu = 0.02"); },
                      "duplicate key 'nu'");
  expect_config_error([] { parse_config("nu = 0.01\nnu = 0.02"); },
                      "line 2, column 1");

  expect_config_error([] { parse_config("nuu = 0.01"); },
                      "unknown key 'nuu'");
  expect_config_error([] { parse_config("a = 1.0\n  bogus = 3"); },
                      "line 2, column 3");

  expect_config_error([] { parse_config("M = 4.5"); },
                      "expected an integer for 'M'");
  expect_config_error([] { parse_config("nu = fast"); },
                      "expected a number for 'nu'");
  expect_config_error([] { parse_config("nu 0.01"); },
                      "expected 'key = value'");
  expect_config_error([] { parse_config("nu =") ; }, "missing value");
  expect_config_error([] { parse_config("variant = \"real") ; },
                      "unterminated string");
}

TEST_CASE("config constraints cover every validated key") {
  expect_config_error([] { parse_config("nu = 0.0"); }, "must be positive");
  expect_config_error([] { parse_config("nu = -1"); }, "must be positive");
  expect_config_error([] { parse_config("a = -0.5"); }, "nonnegative");
  expect_config_error([] { parse_config("alpha0 = -2"); }, "nonnegative");
  expect_config_error([] { parse_config("T = 0"); }, "must be positive");
  expect_config_error([] { parse_config("dt = -0.1"); }, "must be positive");
  expect_config_error([] { parse_config("M_x = 0"); }, "at least 1");
  expect_config_error([] { parse_config("J = -1"); }, "nonnegative");
  expect_config_error([] { parse_config("variant = fourier"); },
                      "must be one of");
  expect_config_error([] { parse_config("variant = restricted"); },
                      "must be one of");
}

TEST_CASE("variant spellings map onto law variants and walls") {
  CHECK(variant_parts("complex") ==
        std::pair<Variant, int>{Variant::complex_modes, -1});
  CHECK(variant_parts("real") ==
        std::pair<Variant, int>{Variant::real_modes, -1});
  CHECK(variant_parts("restricted(0)") ==
        std::pair<Variant, int>{Variant::restricted, 0});
  CHECK(variant_parts("restricted(1)") ==
        std::pair<Variant, int>{Variant::restricted, 1});
  CHECK_THROWS_AS(variant_parts("oblique"), error);
}

TEST_CASE("error classes map onto the documented exit codes") {
  CHECK(static_cast<int>(errc::config) == 2);
  CHECK(static_cast<int>(errc::hypothesis) == 3);
  CHECK(static_cast<int>(errc::gains) == 4);
  CHECK(static_cast<int>(errc::verify) == 5);

  // a neutral eigenvalue classifies as a hypothesis failure (exit 3), the
  // path the design command takes on a neutral synthetic spectrum
  Spectrum s = testfx::acceptance_spectrum();
  s.modes[0].lambda = cplx(-1e-12, 3.0);
  s.modes[1].lambda = cplx(-1e-12, -3.0);
  try {
    count_unstable(s);
    CHECK(false);
  } catch (const error& e) {
    CHECK(e.kind() == "NeutralEigenvalue");
    CHECK(e.code() == errc::hypothesis);
  }

  CHECK_THROWS_AS(run_command("frobnicate", RunConfig{}), error);
}

// ---------------------------------------------------------------------------
// end-to-end command runs
// ---------------------------------------------------------------------------

TEST_CASE("verify on the diffusion-only config passes with no controller") {
  const fs::path dir = case_dir("stokes_verify");
  write_config(dir / "run.cfg", "nu = 1.0\na = 0.0\nM_x = 1\nM = 64\n");
  const CliResult r = run_cli(
      "verify --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);
  const json v = json::parse(slurp(dir / "out" / "verify.json"));
  CHECK(v["N"] == 0);
  CHECK(v["pass"] == true);
  CHECK(v["config"]["a"] == 0.0);
  CHECK(v.contains("note"));
}

TEST_CASE("simulate on the acceptance config certifies the design decay "
          "rate") {
  const fs::path dir = case_dir("bench_simulate");
  write_config(dir / "run.cfg", "nu = 0.002\n");
  const CliResult r = run_cli(
      "simulate --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);

  const json sm = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(sm["N"] == 2);
  const double gamma0 = sm["closed"]["gamma0"];
  const double gap = sm["closed"]["stable_gap"];
  const double gfit = sm["closed"]["gamma_fit"];
  CHECK(gamma0 > 0.0);
  CHECK(gfit >= 0.9 * std::min(gamma0, gap));
  CHECK(sm["certificate"]["pass"] == true);
  CHECK(double(sm["closed"]["norm_ratio"]) <= 1e-2);
  CHECK(double(sm["open"]["norm_ratio"]) >= 10.0);

  // both trajectories exist, carry the audit header, and have one row per
  // sample: T/dt + 1 = 2001
  const std::string closed = slurp(dir / "out" / "trajectory_closed.csv");
  const std::string open = slurp(dir / "out" / "trajectory_open.csv");
  CHECK(closed.find("# nu = 0.002") != std::string::npos);
  CHECK(closed.find("# variant = complex") != std::string::npos);
  CHECK(open.find("# trajectory = open") != std::string::npos);
  CHECK(lines_of(closed) == 2001 + 13);  // 12 audit lines + column header
  CHECK(lines_of(open) == 2001 + 13);
}

TEST_CASE("spectrum on the acceptance config reports passing hypotheses") {
  const fs::path dir = case_dir("bench_spectrum");
  write_config(dir / "run.cfg", "nu = 0.002\n");
  const CliResult r = run_cli(
      "spectrum --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);
  const std::string csv = slurp(dir / "out" / "spectrum.csv");
  CHECK(csv.find("# unstable = 2") != std::string::npos);
  CHECK(csv.find("# semisimple_unstable_block = pass") != std::string::npos);
  CHECK(csv.find("# unique_continuation = pass") != std::string::npos);
  CHECK(csv.find("# hypotheses = pass") != std::string::npos);

  // first data row: most unstable mode at m = -2 with Re lambda ~ -0.511
  const std::size_t head = csv.find("index,m,");
  REQUIRE(head != std::string::npos);
  std::istringstream rows(csv.substr(csv.find('\n', head) + 1));
  std::string first;
  REQUIRE(std::getline(rows, first));
  int idx, m;
  double re, im;
  char c;
  std::istringstream cells(first);
  cells >> idx >> c >> m >> c >> re >> c >> im;
  CHECK(idx == 0);
  CHECK(std::abs(m) == 2);
  CHECK(re == doctest::Approx(-0.51093242).epsilon(1e-4));
}

TEST_CASE("design on the acceptance config emits a passing margin "
          "certificate") {
  const fs::path dir = case_dir("bench_design");
  write_config(dir / "run.cfg", "nu = 0.002\n");
  const CliResult r = run_cli(
      "design --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);
  const json d = json::parse(slurp(dir / "out" / "design.json"));
  CHECK(d["N"] == 2);
  CHECK(d["certificate"]["pass"] == true);
  CHECK(d["certificate"]["margins_positive"] == true);
  CHECK(d["certificate"]["closed_rates_positive"] == true);
  CHECK(double(d["controller"]["gamma0"]) > 0.0);
  CHECK(double(d["controller"]["k_shift"]) > 0.0);
  CHECK(double(d["controller"]["eta"]) > 0.0);
  REQUIRE(d["controller"]["rho"].size() == 2);
  for (const auto& rho : d["controller"]["rho"])
    CHECK(double(rho[0]) > 0.0);
}

TEST_CASE("sweep brackets the nonlinear stability amplitude") {
  const fs::path dir = case_dir("bench_sweep");
  write_config(dir / "run.cfg", "nu = 0.002\nT = 2.0\ndt = 0.1\n");
  const CliResult r = run_cli(
      "sweep --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);
  const json sm = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(sm["certificate"]["pass"] == true);
  const json& sw = sm["sweep"];
  CHECK(int(sw["n_modes"]) >= 2);
  CHECK(double(sw["decays"]) > 0.0);
  REQUIRE(!sw["diverges"].is_null());
  CHECK(double(sw["diverges"]) > double(sw["decays"]));
  CHECK(int(sw["runs"]) >= 4);
}

TEST_CASE("restricted variant verifies end to end") {
  const fs::path dir = case_dir("restricted_verify");
  write_config(dir / "run.cfg",
               "nu = 0.002\nvariant = \"restricted(1)\"\nT = 2.0\ndt = "
               "0.1\n");
  const CliResult r = run_cli(
      "verify --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "out").string() + "'",
      dir);
  CHECK(r.exit == 0);
  const json v = json::parse(slurp(dir / "out" / "verify.json"));
  CHECK(v["pass"] == true);
  CHECK(v["config"]["variant"] == "restricted(1)");
}

TEST_CASE("identical config and seed reproduce bit-identical artifacts") {
  const fs::path dir = case_dir("determinism");
  write_config(dir / "run.cfg",
               "nu = 0.002\nT = 2.0\ndt = 0.1\nseed = 7\noutput_dir = \"" +
                   (dir / "out").string() + "\"\n");
  const std::string args =
      "verify --config '" + (dir / "run.cfg").string() + "'";
  CHECK(run_cli(args, dir).exit == 0);
  const std::string first = slurp(dir / "out" / "verify.json");
  CHECK(run_cli(args, dir).exit == 0);
  CHECK(first == slurp(dir / "out" / "verify.json"));
}

TEST_CASE("bad configs and usage map onto the config exit code") {
  const fs::path dir = case_dir("bad_usage");

  write_config(dir / "m4.cfg", "M = 4\n");
  CliResult r = run_cli(
      "spectrum --config '" + (dir / "m4.cfg").string() + "'", dir);
  CHECK(r.exit == 2);
  CHECK(r.output.find("must be at least 8") != std::string::npos);

  write_config(dir / "dup.cfg", "nu = 0.01\nnu = 0.02\n");
  r = run_cli("spectrum --config '" + (dir / "dup.cfg").string() + "'", dir);
  CHECK(r.exit == 2);
  CHECK(r.output.find("duplicate key 'nu'") != std::string::npos);

  r = run_cli("spectrum --config '" + (dir / "missing.cfg").string() + "'",
              dir);
  CHECK(r.exit == 2);
  CHECK(r.output.find("cannot open") != std::string::npos);

  r = run_cli("frobnicate --config '" + (dir / "m4.cfg").string() + "'",
              dir);
  CHECK(r.exit == 2);

  r = run_cli("--help", dir);
  CHECK(r.exit == 0);
  CHECK(r.output.find("oseen-stab") != std::string::npos);
}

TEST_CASE("the --out flag overrides the config's output directory") {
  const fs::path dir = case_dir("out_override");
  write_config(dir / "run.cfg",
               "nu = 1.0\na = 0.0\nM_x = 1\noutput_dir = \"" +
                   (dir / "config_dir").string() + "\"\n");
  const CliResult r = run_cli(
      "spectrum --config '" + (dir / "run.cfg").string() + "' --out '" +
          (dir / "flag_dir").string() + "'",
      dir);
  CHECK(r.exit == 0);
  CHECK(fs::exists(dir / "flag_dir" / "spectrum.csv"));
  CHECK(!fs::exists(dir / "config_dir"));
}

}  // TEST_SUITE
