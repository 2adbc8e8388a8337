#include "scsf/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <random>

#include "scsf/baseline.hpp"
#include "scsf/error.hpp"
#include "scsf/report.hpp"
#include "scsf/tuning.hpp"

namespace scsf {

namespace fs = std::filesystem;

namespace {

constexpr double kGridHistogramWidth = 0.05;   // %/yr
constexpr double kFleetHistogramWidth = 0.25;  // %/yr

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::UnreadableSource, "cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_output(path) << j.dump(2) << '\n'; }

void write_error(const RunConfig& cfg, const Error& e) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  std::ofstream out(cfg.out / "error.json");
  if (out) out << error_json(e).dump(2) << '\n';
}

bool is_csv(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv";
}

int fit_site(const RunConfig& cfg, std::ostream& log) {
  if (cfg.inputs.size() != 1) throw Error(ErrorCode::InvalidArgument, "fit takes exactly one input CSV");
  const auto& input = cfg.inputs.front();
  const auto loaded = load_site_matrix(input, cfg.interval, cfg.scrub);
  const auto& p = loaded.matrix;
  const std::string site_id = input.stem().string();
  log << "fit " << site_id << ": " << p.rows() << " samples/day x " << p.cols() << " days\n";

  const auto a = analyze_site(p, cfg.hp);
  fs::create_directories(cfg.out);
  write_json(cfg.out / "fit.json", fit_json(site_id, p, a, cfg.hp, loaded.report));
  {
    auto out = open_output(cfg.out / "daily_energy.csv");
    write_daily_energy_csv(out, p, a);
  }
  {
    auto out = open_output(cfg.out / "residuals.csv");
    write_residuals_csv(out, p, a);
  }
  {
    auto out = open_output(cfg.out / "measured.svg");
    write_heatmap_svg(out, p.data, &p.mask, site_id + " measured power (kW)");
  }
  if (a.fit.clear_sky.size() > 0) {
    auto csv = open_output(cfg.out / "clear_sky.csv");
    write_clear_sky_csv(csv, p, a.fit.clear_sky);
    auto svg = open_output(cfg.out / "clear_sky.svg");
    write_heatmap_svg(svg, a.fit.clear_sky, nullptr, site_id + " clear-sky power (kW)");
  }
  log << "  " << a.report.status << ", " << a.report.rate_text << " after " << a.report.iterations
      << " iterations, " << a.report.clear_days << " clear days\n";
  if (a.report.accepted) return kExitAccepted;
  write_json(cfg.out / "error.json", {{"error", a.report.status}, {"message", a.fit.reject_detail}});
  return kExitRejected;
}

int tune_sites(const RunConfig& cfg, std::ostream& log) {
  const auto files = discover_site_files(cfg.inputs);
  fs::create_directories(cfg.out);
  const int workers = cfg.resolved_workers();
  bool any_accepted = false;

  if (cfg.tune.grid) {
    auto results = open_output(cfg.out / "grid_results.csv");
    auto scatter = open_output(cfg.out / "grid_scatter.csv");
    std::vector<double> betas;
    bool first = true;
    for (const auto& file : files) {
      const auto site_id = file.stem().string();
      const auto p = load_site_matrix(file, cfg.interval, cfg.scrub).matrix;
      log << "grid " << site_id << ": " << cfg.tune.grid_spec.size() << " fits\n";
      const auto runs = grid_search(p, cfg.tune.grid_spec, cfg.hp, workers);
      write_grid_results_csv(results, site_id, runs, first);
      write_grid_scatter_csv(scatter, site_id, runs, first);
      first = false;
      for (const auto& r : runs) {
        if (r.error.empty() && r.fit.accepted()) {
          betas.push_back(100.0 * r.fit.beta);
          any_accepted = true;
        }
      }
    }
    auto hist = open_output(cfg.out / "beta_histogram.csv");
    write_histogram_csv(hist, histogram(betas, kGridHistogramWidth));
  }

  if (cfg.tune.sweep) {
    std::vector<SweepCurve> curves;
    for (const auto& file : files) {
      const auto site_id = file.stem().string();
      const auto p = load_site_matrix(file, cfg.interval, cfg.scrub).matrix;
      log << "tau sweep " << site_id << "\n";
      curves.push_back(tau_sweep(p, cfg.hp, cfg.tune.tau_lo, cfg.tune.tau_hi, cfg.tune.tau_step,
                                 cfg.tune.nominal_tau, workers, site_id));
      for (const auto& pt : curves.back().points) any_accepted = any_accepted || pt.accepted;
    }
    auto out = open_output(cfg.out / "tau_curves.csv");
    write_tau_curves_csv(out, curves);
    auto spread = open_output(cfg.out / "tau_spread.csv");
    write_tau_spread_csv(spread, curves);
    auto var = open_output(cfg.out / "tau_variability.csv");
    write_tau_variability_csv(var, tau_variability(curves, tau_grid(cfg.tune.tau_lo, cfg.tune.tau_hi, cfg.tune.tau_step)));
  }
  if (any_accepted) return kExitAccepted;
  write_json(cfg.out / "error.json", {{"error", "NothingAccepted"}, {"message", "no tuning run was accepted"}});
  return kExitRejected;
}

int fleet_sites(const RunConfig& cfg, std::ostream& log) {
  const auto files = discover_site_files(cfg.inputs);
  std::vector<SiteInput> sites;
  for (const auto& file : files) {
    sites.push_back({file.stem().string(),
                     [file, interval = cfg.interval, scrub = cfg.scrub] { return load_site_matrix(file, interval, scrub).matrix; }});
  }
  log << "fleet: " << sites.size() << " sites on " << cfg.resolved_workers() << " workers\n";
  const auto r = run_fleet(sites, cfg.hp, cfg.resolved_workers());
  fs::create_directories(cfg.out);
  {
    auto out = open_output(cfg.out / "fleet_results.csv");
    write_fleet_results_csv(out, r);
  }
  write_json(cfg.out / "summary.json", summary_json(r));
  std::vector<double> betas;
  for (const auto& rec : r.records) {
    if (rec.accepted) betas.push_back(rec.beta_percent);
  }
  {
    auto out = open_output(cfg.out / "fleet_histogram.csv");
    write_histogram_csv(out, histogram(betas, kFleetHistogramWidth));
  }
  if (cfg.external) {
    std::ifstream in(*cfg.external);
    if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open external table " + cfg.external->string());
    const auto c = compare_external(r, parse_external_csv(in));
    auto out = open_output(cfg.out / "comparison.csv");
    write_comparison_csv(out, c);
    write_json(cfg.out / "comparison.json", comparison_json(c));
  }
  log << "  accepted " << r.summary.included << " of " << r.summary.total << "\n";
  if (r.summary.included > 0) return kExitAccepted;
  write_json(cfg.out / "error.json", {{"error", "NothingAccepted"}, {"message", "no site produced an accepted fit"}});
  return kExitRejected;
}

int synth_files(const RunConfig& cfg, std::ostream& log) {
  const auto sites = synth_sites(cfg.synth);
  fs::create_directories(cfg.out);
  for (const auto& s : sites) {
    auto out = open_output(cfg.out / (s.site_id + ".csv"));
    write_power_csv(out, s.series);
  }
  write_json(cfg.out / "truth.json", truth_json(sites));
  log << "synth: wrote " << sites.size() << " sites to " << cfg.out.string() << "\n";
  return kExitAccepted;
}

int guarded(const RunConfig& cfg, std::ostream& log, int (*body)(const RunConfig&, std::ostream&)) {
  try {
    cfg.validate();
    return body(cfg, log);
  } catch (const Error& e) {
    log << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    write_error(cfg, e);
    return kExitInvalid;
  } catch (const std::exception& e) {
    const Error wrapped(ErrorCode::InvalidArgument, e.what());
    log << "error: " << e.what() << "\n";
    write_error(cfg, wrapped);
    return kExitInvalid;
  }
}

}  // namespace

ScrubResult load_site_matrix(const fs::path& csv, int interval, const ScrubConfig& rules) {
  const auto raw = load_power_csv(csv);
  return scrub(embed_matrix(regularize(raw, interval)), rules);
}

std::vector<fs::path> discover_site_files(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file() && is_csv(entry.path())) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (is_csv(input)) {
      files.push_back(input);
    } else {
      std::ifstream in(input);
      if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open " + input.string());
      std::string line;
      while (std::getline(in, line)) {
        const auto cut = line.find('#');
        line = line.substr(0, cut);
        line.erase(0, line.find_first_not_of(" \t\r"));
        line.erase(line.find_last_not_of(" \t\r") + 1);
        if (line.empty()) continue;
        const fs::path p(line);
        files.push_back(p.is_absolute() ? p : input.parent_path() / p);
      }
    }
  }
  if (files.empty()) throw Error(ErrorCode::NoSites, "no site CSVs found");
  return files;
}

std::vector<SyntheticSite> synth_sites(const SynthSettings& settings) {
  std::mt19937_64 rng(settings.scenario.seed);
  std::normal_distribution<double> draw(settings.scenario.beta, settings.beta_std);
  std::vector<SyntheticSite> sites;
  char id[32];
  for (int i = 0; i < settings.sites; ++i) {
    Scenario sc = settings.scenario;
    sc.seed = settings.scenario.seed + static_cast<std::uint64_t>(i);
    if (settings.beta_std > 0.0) sc.beta = draw(rng);
    sc.validate();
    std::snprintf(id, sizeof(id), "site_%03d", i + 1);
    sites.push_back(generate_site(sc, id));
  }
  return sites;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) { return guarded(cfg, log, fit_site); }
int cmd_tune(const RunConfig& cfg, std::ostream& log) { return guarded(cfg, log, tune_sites); }
int cmd_fleet(const RunConfig& cfg, std::ostream& log) { return guarded(cfg, log, fleet_sites); }
int cmd_synth(const RunConfig& cfg, std::ostream& log) { return guarded(cfg, log, synth_files); }

int run_command(const RunConfig& cfg, std::ostream& log) {
  if (cfg.command == "fit") return cmd_fit(cfg, log);
  if (cfg.command == "tune") return cmd_tune(cfg, log);
  if (cfg.command == "fleet") return cmd_fleet(cfg, log);
  if (cfg.command == "synth") return cmd_synth(cfg, log);
  log << "error: unknown command '" << cfg.command << "'\n";
  return kExitInvalid;
}

}  // namespace scsf
