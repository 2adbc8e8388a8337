#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "scsf/baseline.hpp"
#include "scsf/config.hpp"
#include "scsf/error.hpp"
#include "scsf/fleet.hpp"
#include "scsf/ingest.hpp"
#include "scsf/synth.hpp"
#include "scsf/tuning.hpp"

namespace scsf {

// Column headers of every CSV artifact, pinned by tests and docs/formats.md.
namespace header {
inline constexpr const char* kDailyEnergy = "day,date,measured_kwh,clear_sky_kwh,clear_score,clear_flag";
inline constexpr const char* kResiduals = "day,date,measured_kwh,clear_sky_kwh,residual_kwh,trend_kwh";
inline constexpr const char* kGridResults =
    "site_id,k,tau,mu_left,mu_right,mu_year,beta_percent,accepted,status,iterations";
inline constexpr const char* kHistogram = "bin_lo_percent,bin_hi_percent,count";
inline constexpr const char* kGridScatter = "site_id,parameter,value,beta_percent";
inline constexpr const char* kTauCurves = "site_id,tau,beta_percent,normalized_percent,accepted,status";
inline constexpr const char* kTauVariability = "candidate_tau,variability,best";
inline constexpr const char* kTauSpread = "site_id,spread_percent";
inline constexpr const char* kFleetResults =
    "site_id,beta_percent,accepted,reason,iterations,runtime_s,clear_days,residual_slope_kwh_per_day,outlier";
inline constexpr const char* kComparison = "site_id,scsf_percent,external_percent,lo,hi,delta,within";
inline constexpr const char* kPower = "timestamp,power";
}  // namespace header

// clear_sky.csv: first column "time" (HH:MM), then one column per day
// labelled by date; one row per time-of-day sample, kW.
void write_clear_sky_csv(std::ostream& out, const PowerMatrix& p, const Eigen::MatrixXd& clear_sky);
void write_daily_energy_csv(std::ostream& out, const PowerMatrix& p, const SiteAnalysis& a);
void write_residuals_csv(std::ostream& out, const PowerMatrix& p, const SiteAnalysis& a);
nlohmann::json fit_json(const std::string& site_id, const PowerMatrix& p, const SiteAnalysis& a,
                        const HyperParams& hp, const ScrubReport& scrub);

// Heatmap with a fixed five-stop ramp (dark purple to yellow) normalized by
// the file's maximum; masked cells are light grey.
void write_heatmap_svg(std::ostream& out, const Eigen::MatrixXd& values, const BoolMatrix* mask,
                       const std::string& title);

void write_grid_results_csv(std::ostream& out, const std::string& site_id, const std::vector<GridRun>& runs,
                            bool with_header);
void write_grid_scatter_csv(std::ostream& out, const std::string& site_id, const std::vector<GridRun>& runs,
                            bool with_header);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins);
void write_tau_curves_csv(std::ostream& out, const std::vector<SweepCurve>& curves);
void write_tau_variability_csv(std::ostream& out, const TauVariability& v);
void write_tau_spread_csv(std::ostream& out, const std::vector<SweepCurve>& curves);

void write_fleet_results_csv(std::ostream& out, const FleetResult& r);
nlohmann::json summary_json(const FleetResult& r);
void write_comparison_csv(std::ostream& out, const Comparison& c);
nlohmann::json comparison_json(const Comparison& c);

nlohmann::json truth_json(const std::vector<SyntheticSite>& sites);
nlohmann::json error_json(const Error& e);

}  // namespace scsf
