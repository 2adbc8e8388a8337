#include "scsf/cli.hpp"

#include <ostream>

#include <CLI11.hpp>

#include "scsf/commands.hpp"
#include "scsf/error.hpp"

namespace scsf {

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<int> interval;
  std::optional<int> k;
  std::optional<double> tau;
  std::optional<double> mu_left;
  std::optional<double> mu_right;
  std::optional<double> mu_year;
  bool no_degradation = false;
  std::optional<std::string> external;
  std::optional<std::uint64_t> seed;
  bool grid = false;
  bool sweep = false;
  std::optional<double> beta;
  std::optional<double> beta_std;
  std::optional<int> sites;
  std::optional<double> years;
  std::optional<double> cloud_fraction;
  std::optional<double> noise;
  std::optional<double> capacity_shift;
  std::optional<double> missing_days;
  std::vector<std::string> inputs;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Config file (key = value with [sections])");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--workers", f.workers, "Worker threads (default: SCSF_WORKERS or all cores)");
  cmd->add_option("--interval", f.interval, "Sampling interval in seconds");
}

void add_model(CLI::App* cmd, Flags& f) {
  cmd->add_option("--k", f.k, "Rank of the clear-sky model");
  cmd->add_option("--tau", f.tau, "Quantile level of the fit loss");
  cmd->add_option("--mu-left", f.mu_left, "Smoothness weight on daily profiles");
  cmd->add_option("--mu-right", f.mu_right, "Smoothness weight on day-to-day variation");
  cmd->add_option("--mu-year", f.mu_year, "Weight of the year-over-year term");
  cmd->add_flag("--no-degradation", f.no_degradation, "Freeze the degradation rate at 0");
  cmd->add_option("inputs", f.inputs, "Site CSVs, directories or manifests")->required();
}

void apply_flags(RunConfig& c, const Flags& f) {
  if (f.out) c.out = *f.out;
  if (f.workers) c.workers = *f.workers;
  if (f.k) c.hp.k = *f.k;
  if (f.tau) c.hp.tau = *f.tau;
  if (f.mu_left) c.hp.mu_left = *f.mu_left;
  if (f.mu_right) c.hp.mu_right = *f.mu_right;
  if (f.mu_year) c.hp.mu_year = *f.mu_year;
  if (f.no_degradation) c.hp.fit_degradation = false;
  if (f.external) c.external = *f.external;
  if (f.grid) c.tune.grid = true;
  if (f.sweep) c.tune.sweep = true;
  for (const auto& in : f.inputs) c.inputs.emplace_back(in);

  auto& s = c.synth;
  if (f.interval) (c.command == "synth" ? s.scenario.interval : c.interval) = *f.interval;
  if (f.seed) s.scenario.seed = *f.seed;
  if (f.beta) s.scenario.beta = *f.beta;
  if (f.beta_std) s.beta_std = *f.beta_std;
  if (f.sites) s.sites = *f.sites;
  if (f.years) s.scenario.years = *f.years;
  if (f.cloud_fraction) s.scenario.cloud_fraction = *f.cloud_fraction;
  if (f.noise) s.scenario.noise = *f.noise;
  if (f.capacity_shift) s.scenario.capacity_shift = *f.capacity_shift;
  if (f.missing_days) s.scenario.missing_days = *f.missing_days;
}

}  // namespace

CliParse parse_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clear-sky signal factorization: PV degradation from power data alone", "scsf"};
  app.require_subcommand(1);
  Flags f;

  auto* fit = app.add_subcommand("fit", "Fit one site and write clear-sky, energy and residual artifacts");
  add_common(fit, f);
  add_model(fit, f);

  auto* tune = app.add_subcommand("tune", "Hyperparameter grid search and quantile sweep");
  add_common(tune, f);
  add_model(tune, f);
  tune->add_flag("--grid", f.grid, "Run the hyperparameter grid");
  tune->add_flag("--sweep", f.sweep, "Run the quantile sweep");

  auto* fleet = app.add_subcommand("fleet", "Fit every site of a fleet and summarize the rates");
  add_common(fleet, f);
  add_model(fleet, f);
  fleet->add_option("--external", f.external, "External estimates to compare against");

  auto* synth = app.add_subcommand("synth", "Write synthetic sites with known degradation");
  add_common(synth, f);
  synth->add_option("--seed", f.seed, "Random seed");
  synth->add_option("--beta", f.beta, "True degradation rate (fraction per year)");
  synth->add_option("--beta-std", f.beta_std, "Spread of per-site rates");
  synth->add_option("--sites", f.sites, "Number of sites");
  synth->add_option("--years", f.years, "Length of each series");
  synth->add_option("--cloud-fraction", f.cloud_fraction, "Probability a day is cloudy");
  synth->add_option("--noise", f.noise, "Multiplicative noise level");
  synth->add_option("--capacity-shift", f.capacity_shift, "Output factor for the first year");
  synth->add_option("--missing-days", f.missing_days, "Probability a whole day is missing");

  CliParse result;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    result.status = code == 0 ? kExitAccepted : kExitInvalid;
    return result;
  }

  RunConfig cfg;
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    if (f.config) apply_config(cfg, load_config(*f.config));
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    result.status = kExitInvalid;
    return result;
  }
  apply_flags(cfg, f);
  result.config = std::move(cfg);
  return result;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto parsed = parse_cli(argc, argv, out, err);
  if (!parsed.config) return parsed.status;
  return run_command(*parsed.config, err);
}

}  // namespace scsf
