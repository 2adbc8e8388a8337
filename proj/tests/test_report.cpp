#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scsf/cli.hpp"
#include "scsf/commands.hpp"
#include "scsf/report.hpp"

using namespace scsf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scsf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  INFO(err.str());
  return status;
}

// Plain least-squares slope of y on x.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Two hourly two-year sites with known rates, written once through the CLI.
struct Workspace {
  fs::path root = fs::temp_directory_path() / "scsf_report";
  fs::path sites = root / "sites";
  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
    REQUIRE(cli({"synth", "--out", sites.string(), "--seed", "7", "--sites", "2", "--years", "2", "--interval",
                 "3600", "--beta", "-0.02"}) == kExitAccepted);
  }
};

const Workspace& workspace() {
  static const Workspace w;
  return w;
}

}  // namespace

TEST_CASE("every pinned header is documented in docs/formats.md") {
  const auto doc = slurp(fs::path(SCSF_SOURCE_DIR) / "docs" / "formats.md");
  std::set<std::string> documented;
  std::istringstream in(doc);
  std::string line;
  bool in_block = false;
  while (std::getline(in, line)) {
    if (line.rfind("```", 0) == 0) {
      in_block = !in_block;
      continue;
    }
    if (in_block) documented.insert(line);
  }
  for (const char* h : {header::kDailyEnergy, header::kResiduals, header::kGridResults, header::kHistogram,
                        header::kGridScatter, header::kTauCurves, header::kTauVariability, header::kTauSpread,
                        header::kFleetResults, header::kComparison, header::kPower}) {
    CAPTURE(h);
    CHECK(documented.count(h) == 1);
  }
}

TEST_CASE("table writers emit their header and one row per entry") {
  std::ostringstream hist;
  write_histogram_csv(hist, {{-1.0, -0.75, 2}, {-0.75, -0.5, 0}});
  CHECK(hist.str() == std::string(header::kHistogram) + "\n-1,-0.75,2\n-0.75,-0.5,0\n");

  FleetResult fr;
  fr.records = {{"a", -0.5, true, "accepted", 12, 1.5, 40, 0.25},
                {"b", 0.0, false, "NotConverged", 100, 2.0, 0, std::nullopt}};
  fr.outlier = {false, false};
  std::ostringstream fleet;
  write_fleet_results_csv(fleet, fr);
  CHECK(fleet.str() == std::string(header::kFleetResults) +
                           "\na,-0.5,true,accepted,12,1.5,40,0.25,false\nb,,false,NotConverged,100,2,0,,false\n");

  Comparison c;
  c.rows = {{"a", -0.5, -0.4, -0.9, 0.1, -0.1, true}};
  std::ostringstream comp;
  write_comparison_csv(comp, c);
  CHECK(comp.str() == std::string(header::kComparison) + "\na,-0.5,-0.4,-0.9,0.1,-0.1,true\n");

  SweepCurve curve;
  curve.site_id = "s";
  curve.nominal_tau = 0.85;
  curve.points = {{0.8, -0.012, true, "accepted"}, {0.85, -0.010, true, "accepted"}};
  std::ostringstream tau;
  write_tau_curves_csv(tau, {curve});
  CHECK(tau.str() == std::string(header::kTauCurves) + "\ns,0.8,-1.2,-0.2,true,accepted\ns,0.85,-1,0,true,accepted\n");

  std::ostringstream spread;
  write_tau_spread_csv(spread, {curve});
  CHECK(spread.str() == std::string(header::kTauSpread) + "\ns,0.2\n");
}

TEST_CASE("heatmaps cover every cell once and grey out missing samples") {
  Eigen::MatrixXd v(3, 4);
  v << 0, 1, 1, 2,  //
      4, 4, 4, 4,   //
      0, 0, 3, 0;
  BoolMatrix mask = BoolMatrix::Constant(3, 4, true);
  mask(2, 1) = false;
  std::ostringstream out;
  write_heatmap_svg(out, v, &mask, "a < b");
  const auto svg = out.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("a &lt; b") != std::string::npos);
  CHECK(svg.size() >= 7);
  CHECK(svg.substr(svg.size() - 7) == "</svg>\n");

  const std::regex rect(R"re(<rect x="(\d+)" y="(\d+)" width="(\d+)" height="2" fill="(#[0-9a-f]{6})"/>)re");
  std::map<long, long> covered;  // row -> total width
  int grey = 0;
  std::set<std::string> top;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it) {
    covered[std::stol((*it)[2])] += std::stol((*it)[3]);
    grey += (*it)[4] == "#d9d9d9";
    if ((*it)[4] == "#fde725") top.insert((*it)[2]);
  }
  CHECK(covered.size() == 3);
  for (const auto& [row, width] : covered) CHECK(width == 8);
  CHECK(grey == 1);
  CHECK(top.size() == 1);  // only the all-4 row reaches the maximum
}

TEST_CASE("fit writes every artifact with a rate near the truth") {
  const auto& w = workspace();
  const auto out = w.root / "fit";
  REQUIRE(cli({"fit", (w.sites / "site_001.csv").string(), "--interval", "3600", "--out", out.string()}) ==
          kExitAccepted);
  const auto truth = read_json(w.sites / "truth.json");
  const auto fit = read_json(out / "fit.json");
  CHECK(fit["accepted"] == true);
  CHECK(fit["status"] == "accepted");
  CHECK(std::abs(fit["beta_percent"].get<double>() - truth["sites"][0]["beta_percent"].get<double>()) <= 0.3);
  for (const char* key : {"site_id", "converged", "beta", "rate_text", "iterations", "objective", "clear_days",
                          "residual_slope_kwh_per_day", "residual_slope_half_width", "samples_per_day", "days",
                          "start_date", "delta_t_hours", "hyperparameters", "scrub", "warnings", "trace"}) {
    CAPTURE(key);
    CHECK(fit.contains(key));
  }
  CHECK_FALSE(fs::exists(out / "error.json"));

  const auto days = fit["days"].get<std::size_t>();
  const auto m = fit["samples_per_day"].get<std::size_t>();
  const auto energy = read_csv(out / "daily_energy.csv");
  CHECK(first_line(out / "daily_energy.csv") == header::kDailyEnergy);
  CHECK(energy.size() == days + 1);
  std::size_t flagged = 0;
  for (std::size_t i = 1; i < energy.size(); ++i) flagged += energy[i][5] == "true";
  CHECK(flagged == fit["clear_days"].get<std::size_t>());

  const auto clear = read_csv(out / "clear_sky.csv");
  CHECK(clear.size() == m + 1);
  CHECK(clear[0].size() == days + 1);
  CHECK(clear[0][0] == "time");
  CHECK(clear[1][0] == "00:00");
  CHECK(clear[0][1] == fit["start_date"]);

  CHECK(first_line(out / "residuals.csv") == header::kResiduals);
  const auto res = read_csv(out / "residuals.csv");
  CHECK(res.size() == flagged + 1);
  std::vector<double> x, y;
  for (std::size_t i = 1; i < res.size(); ++i) {
    x.push_back(std::stod(res[i][0]));
    y.push_back(std::stod(res[i][4]));
    CHECK(std::stod(res[i][4]) == doctest::Approx(std::stod(res[i][2]) - std::stod(res[i][3])).epsilon(1e-6));
  }
  CHECK(ols_slope(x, y) == doctest::Approx(fit["residual_slope_kwh_per_day"].get<double>()).epsilon(1e-5));

  for (const char* svg : {"measured.svg", "clear_sky.svg"}) CHECK(slurp(out / svg).rfind("<svg", 0) == 0);
}

TEST_CASE("freezing degradation leaves the rate in the residual trend") {
  const auto& w = workspace();
  const auto full = w.root / "fit";
  const auto frozen = w.root / "frozen";
  if (!fs::exists(full / "fit.json")) {
    REQUIRE(cli({"fit", (w.sites / "site_001.csv").string(), "--interval", "3600", "--out", full.string()}) ==
            kExitAccepted);
  }
  REQUIRE(cli({"fit", (w.sites / "site_001.csv").string(), "--interval", "3600", "--no-degradation", "--out",
               frozen.string()}) == kExitAccepted);
  const auto fit = read_json(frozen / "fit.json");
  CHECK(fit["beta"].get<double>() == 0.0);
  CHECK(fit["hyperparameters"]["degradation"] == false);

  auto slope_and_level = [](const fs::path& csv) {
    const auto rows = read_csv(csv);
    std::vector<double> x, y;
    double level = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      x.push_back(std::stod(rows[i][0]));
      y.push_back(std::stod(rows[i][4]));
      level += std::stod(rows[i][2]);
    }
    return std::pair{ols_slope(x, y), level / static_cast<double>(x.size())};
  };
  const auto [forced, level] = slope_and_level(frozen / "residuals.csv");
  const auto [unforced, unused] = slope_and_level(full / "residuals.csv");
  (void)unused;
  // Unmodelled decay of -2 %/yr shows up as a daily loss of about 0.02 * level / 365.
  const double expected = -0.02 * level / 365.0;
  CHECK(forced < 0.0);
  CHECK(forced == doctest::Approx(expected).epsilon(0.35));
  CHECK(std::abs(unforced) < std::abs(forced) / 3.0);
}

TEST_CASE("synth output is byte-identical across runs") {
  const auto& w = workspace();
  const auto again = w.root / "again";
  REQUIRE(cli({"synth", "--out", again.string(), "--seed", "7", "--sites", "2", "--years", "2", "--interval", "3600",
               "--beta", "-0.02"}) == kExitAccepted);
  for (const char* f : {"site_001.csv", "site_002.csv", "truth.json"}) {
    CAPTURE(f);
    CHECK(slurp(w.sites / f) == slurp(again / f));
  }
  CHECK(first_line(w.sites / "site_001.csv") == header::kPower);
}

TEST_CASE("fleet summarizes sites and agrees with itself as an external table") {
  const auto& w = workspace();
  const auto out = w.root / "fleet";
  REQUIRE(cli({"fleet", w.sites.string(), "--interval", "3600", "--out", out.string()}) == kExitAccepted);
  CHECK(first_line(out / "fleet_results.csv") == header::kFleetResults);
  CHECK(first_line(out / "fleet_histogram.csv") == header::kHistogram);
  const auto rows = read_csv(out / "fleet_results.csv");
  REQUIRE(rows.size() == 3);
  const auto summary = read_json(out / "summary.json");
  CHECK(summary["total"] == 2);
  CHECK(summary["included"] == 2);
  const double a = std::stod(rows[1][1]), b = std::stod(rows[2][1]);
  CHECK(summary["mean_percent"].get<double>() == doctest::Approx((a + b) / 2.0).epsilon(1e-8));
  CHECK(summary["std_percent"].get<double>() == doctest::Approx(std::abs(a - b) / std::sqrt(2.0)).epsilon(1e-6));

  const auto ext = w.root / "external.csv";
  {
    std::ofstream e(ext);
    e.precision(12);
    e << "hi,site_id,rate,lo\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double r = std::stod(rows[i][1]);
      e << r + 1e-6 << ',' << rows[i][0] << ',' << r << ',' << r - 1e-6 << '\n';
    }
  }
  const auto cmp = w.root / "compare";
  REQUIRE(cli({"fleet", w.sites.string(), "--interval", "3600", "--external", ext.string(), "--out", cmp.string()}) ==
          kExitAccepted);
  const auto c = read_json(cmp / "comparison.json");
  CHECK(c["joined"] == 2);
  CHECK(c["within_fraction"].get<double>() == 1.0);
  CHECK(c["quadrants"]["both_negative"] == 2);
  CHECK(first_line(cmp / "comparison.csv") == header::kComparison);
  const auto rerun = read_csv(cmp / "fleet_results.csv");
  REQUIRE(rerun.size() == rows.size());
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rerun[i][1] == rows[i][1]);
}

TEST_CASE("tune writes grid and sweep tables") {
  const auto& w = workspace();
  const auto cfg = w.root / "tune.ini";
  std::ofstream(cfg) << "[tune]\ninterval = 3600\ngrid = true\ngrid.k = 5, 6\ngrid.tau = 0.85\ngrid.mu_left = 500\n"
                        "grid.mu_right = 1000\nsweep = true\ntau_lo = 0.845\ntau_hi = 0.855\n";
  const auto out = w.root / "tune";
  REQUIRE(cli({"tune", (w.sites / "site_001.csv").string(), "--config", cfg.string(), "--out", out.string()}) ==
          kExitAccepted);
  const auto grid = read_csv(out / "grid_results.csv");
  CHECK(first_line(out / "grid_results.csv") == header::kGridResults);
  REQUIRE(grid.size() == 3);
  CHECK(grid[1][1] == "5");
  CHECK(grid[2][1] == "6");
  std::size_t accepted = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) accepted += grid[i][7] == "true";
  CHECK(read_csv(out / "grid_scatter.csv").size() == 5 * accepted + 1);
  CHECK(first_line(out / "beta_histogram.csv") == header::kHistogram);

  const auto curves = read_csv(out / "tau_curves.csv");
  CHECK(first_line(out / "tau_curves.csv") == header::kTauCurves);
  REQUIRE(curves.size() == 4);
  CHECK(curves[2][1] == "0.85");
  CHECK(curves[2][3] == "0");
  // The k = 6 grid point and the nominal sweep point are the same fit.
  CHECK(curves[2][2] == grid[2][6]);
  CHECK(first_line(out / "tau_variability.csv") == header::kTauVariability);
  CHECK(read_csv(out / "tau_variability.csv").size() == 4);
  CHECK(first_line(out / "tau_spread.csv") == header::kTauSpread);
}
