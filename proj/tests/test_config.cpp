#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "scsf/cli.hpp"
#include "scsf/commands.hpp"
#include "scsf/config.hpp"
#include "scsf/error.hpp"

using namespace scsf;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("scsf_config_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

struct Cli {
  std::ostringstream out, err;
  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "scsf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  std::optional<RunConfig> parsed(std::vector<std::string> args) {
    args.insert(args.begin(), "scsf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return parse_cli(static_cast<int>(argv.size()), argv.data(), out, err).config;
  }
};

std::string error_code_in(const fs::path& dir) {
  std::ifstream in(dir / "error.json");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  const auto at = text.find("\"error\": \"");
  if (at == std::string::npos) return {};
  const auto from = at + 10;
  return text.substr(from, text.find('"', from) - from);
}

}  // namespace

TEST_CASE("run config defaults are the published hyperparameters") {
  const RunConfig c;
  CHECK(c.hp.k == 6);
  CHECK(c.hp.tau == doctest::Approx(0.85));
  CHECK(c.hp.mu_left == doctest::Approx(500.0));
  CHECK(c.hp.mu_right == doctest::Approx(1000.0));
  CHECK(c.hp.mu_year == doctest::Approx(100.0));
  CHECK(c.hp.fit_degradation);
  CHECK(c.interval == 300);
  CHECK_FALSE(c.tune.grid);
  CHECK(c.tune.grid_spec.size() == 81);
}

TEST_CASE("config sections apply common first, then the command") {
  const auto file = parse(
      "# site defaults\n"
      "[common]\n"
      "tau = 0.82\n"
      "k = 4\n"
      "\n"
      "[fit]\n"
      "tau = 0.88   ; command section wins\n"
      "degradation = false\n"
      "[synth]\n"
      "beta = -0.02\n");
  RunConfig fit;
  fit.command = "fit";
  apply_config(fit, file);
  CHECK(fit.hp.tau == doctest::Approx(0.88));
  CHECK(fit.hp.k == 4);
  CHECK_FALSE(fit.hp.fit_degradation);
  CHECK(fit.synth.scenario.beta == doctest::Approx(-0.01));

  RunConfig fleet;
  fleet.command = "fleet";
  apply_config(fleet, file);
  CHECK(fleet.hp.tau == doctest::Approx(0.82));
  CHECK(fleet.hp.fit_degradation);

  RunConfig synth;
  synth.command = "synth";
  apply_config(synth, file);
  CHECK(synth.synth.scenario.beta == doctest::Approx(-0.02));
  CHECK(synth.hp.k == 6);
}

TEST_CASE("grid lists parse as comma separated values") {
  RunConfig c;
  c.command = "tune";
  apply_config(c, parse("[tune]\ngrid = yes\ngrid.k = 4, 6\ngrid.tau = 0.85\ngrid.mu_year = 10,100,1000\n"));
  CHECK(c.tune.grid);
  CHECK(c.tune.grid_spec.k == std::vector<int>{4, 6});
  CHECK(c.tune.grid_spec.mu_year.size() == 3);
  CHECK(c.tune.grid_spec.size() == 2 * 1 * 3 * 3 * 3);
}

TEST_CASE("unknown keys and sections are rejected with their line") {
  for (const std::string text : {"[fit]\nbogus = 1\n", "[fit]\nk = 6\n[plot]\n", "[synth]\ntau = 0.8\n",
                                 "k = 6\n", "[fit]\njust words\n", "[fit\n"}) {
    CAPTURE(text);
    CHECK(code_of([&] { parse(text); }) == ErrorCode::InvalidArgument);
  }
  try {
    parse("[fit]\n\n# note\nbogus = 1\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("unparseable values are rejected") {
  RunConfig c;
  c.command = "fit";
  CHECK(code_of([&] { apply_config(c, parse("[fit]\ntau = high\n")); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { apply_config(c, parse("[fit]\nk = 6.5\n")); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { apply_config(c, parse("[fit]\ndegradation = maybe\n")); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("validation catches bad settings before any compute") {
  RunConfig c;
  c.command = "fit";
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);  // no input
  c.inputs = {"site.csv"};
  CHECK_NOTHROW(c.validate());

  auto bad = c;
  bad.hp.tau = 1.5;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::TauOutOfRange);
  bad = c;
  bad.interval = 7;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::IntervalInvalid);

  auto tune = c;
  tune.command = "tune";
  CHECK(code_of([&] { tune.validate(); }) == ErrorCode::InvalidArgument);  // neither grid nor sweep
  tune.tune.grid = true;
  tune.tune.grid_spec.mu_left.clear();
  CHECK(code_of([&] { tune.validate(); }) == ErrorCode::InvalidArgument);
  tune.tune.grid = false;
  tune.tune.sweep = true;
  CHECK_NOTHROW(tune.validate());
  tune.tune.nominal_tau = 0.8525;
  CHECK(code_of([&] { tune.validate(); }) == ErrorCode::StepInvalid);

  RunConfig synth;
  synth.command = "synth";
  CHECK_NOTHROW(synth.validate());
  synth.synth.sites = 0;
  CHECK(code_of([&] { synth.validate(); }) == ErrorCode::InvalidScenario);
  synth.synth.sites = 2;
  synth.synth.scenario.capacity_shift = -1.0;
  CHECK(code_of([&] { synth.validate(); }) == ErrorCode::InvalidScenario);
}

TEST_CASE("flags win over the config file") {
  const auto dir = scratch("flags");
  std::ofstream(dir / "run.ini") << "[common]\ntau = 0.82\nk = 4\nworkers = 3\n[fit]\nmu_year = 10\n";
  Cli cli;
  const auto c = cli.parsed({"fit", "site.csv", "--config", (dir / "run.ini").string(), "--tau", "0.88",
                             "--mu-left", "250", "--no-degradation", "--out", "elsewhere"});
  REQUIRE(c);
  CHECK(c->command == "fit");
  CHECK(c->hp.tau == doctest::Approx(0.88));
  CHECK(c->hp.k == 4);
  CHECK(c->hp.mu_left == doctest::Approx(250.0));
  CHECK(c->hp.mu_year == doctest::Approx(10.0));
  CHECK_FALSE(c->hp.fit_degradation);
  CHECK(c->workers == 3);
  CHECK(c->out == fs::path("elsewhere"));
  REQUIRE(c->inputs.size() == 1);

  const auto s = cli.parsed({"synth", "--interval", "3600", "--seed", "9", "--sites", "4", "--beta-std", "0.002"});
  REQUIRE(s);
  CHECK(s->synth.scenario.interval == 3600);
  CHECK(s->synth.scenario.seed == 9);
  CHECK(s->synth.sites == 4);
  CHECK(s->synth.beta_std == doctest::Approx(0.002));
}

TEST_CASE("an out-of-range tau fails validation and writes only error.json") {
  const auto dir = scratch("tau");
  std::ofstream(dir / "site.csv") << "timestamp,power\n2020-01-01T00:00:00,0\n";
  Cli cli;
  const int status = cli.run({"fit", (dir / "site.csv").string(), "--tau", "1.5", "--out", (dir / "out").string()});
  CHECK(status == kExitInvalid);
  CHECK(error_code_in(dir / "out") == "TauOutOfRange");
  CHECK_FALSE(fs::exists(dir / "out" / "fit.json"));
  CHECK(std::distance(fs::directory_iterator(dir / "out"), fs::directory_iterator{}) == 1);
}

TEST_CASE("usage errors exit with the invalid status") {
  Cli cli;
  CHECK(cli.run({}) == kExitInvalid);
  CHECK(cli.run({"fit"}) == kExitInvalid);
  CHECK(cli.run({"fit", "a.csv", "--tau", "abc"}) == kExitInvalid);
  CHECK(cli.run({"plot", "a.csv"}) == kExitInvalid);
  CHECK(cli.run({"fit", "a.csv", "--config", "/nonexistent/run.ini"}) == kExitInvalid);
  Cli help;
  CHECK(help.run({"--help"}) == kExitAccepted);
  CHECK(help.out.str().find("fleet") != std::string::npos);
}

TEST_CASE("a fleet directory without CSVs reports NoSites") {
  const auto dir = scratch("nosites");
  fs::create_directories(dir / "empty");
  std::ofstream(dir / "empty" / "notes.txt") << "nothing here\n";
  Cli cli;
  CHECK(cli.run({"fleet", (dir / "empty").string(), "--out", (dir / "out").string()}) == kExitInvalid);
  CHECK(error_code_in(dir / "out") == "NoSites");
}

TEST_CASE("site discovery reads directories, files and manifests") {
  const auto dir = scratch("discover");
  fs::create_directories(dir / "fleet");
  for (const char* name : {"b.csv", "a.CSV", "c.txt"}) std::ofstream(dir / "fleet" / name) << "timestamp,power\n";
  std::ofstream(dir / "list.txt") << "# chosen sites\nfleet/b.csv\n\n  fleet/a.CSV  \n";
  const auto from_dir = discover_site_files({dir / "fleet"});
  REQUIRE(from_dir.size() == 2);
  CHECK(from_dir[0].filename() == "a.CSV");
  CHECK(from_dir[1].filename() == "b.csv");
  const auto from_manifest = discover_site_files({dir / "list.txt"});
  REQUIRE(from_manifest.size() == 2);
  CHECK(from_manifest[0] == dir / "fleet" / "b.csv");
  CHECK(code_of([&] { discover_site_files({dir / "missing.txt"}); }) == ErrorCode::UnreadableSource);
}
