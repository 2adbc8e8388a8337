#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scsf/ingest.hpp"

namespace scsf {

// Synthetic PV site. The seasonal cycle repeats every 365 days exactly, so
// clear-sky daily energy on day i + 365 is (1 + beta) times that on day i.
struct Scenario {
  std::uint64_t seed = 1;
  double beta = -0.01;           // fractional change per year
  double years = 3.0;
  int interval = 900;            // seconds
  double cloud_fraction = 0.4;   // probability a day is cloudy
  double noise = 0.02;           // multiplicative Gaussian noise (std)
  double capacity_kw = 5.0;
  double latitude_deg = 37.0;
  double capacity_shift = 1.0;   // factor applied to the first 365 days
  double missing_days = 0.0;     // probability a whole day is missing
  Date start{std::chrono::year{2015}, std::chrono::month{1}, std::chrono::day{1}};

  int day_count() const;
  void validate() const;  // throws InvalidScenario
};

struct SyntheticSite {
  std::string site_id;
  Scenario scenario;
  RegularSeries series;
  Eigen::MatrixXd clear_sky;   // m x n, kW, before clouds/noise/capacity shift
  std::vector<bool> cloudy;    // ground-truth cloudy-day labels
};

SyntheticSite generate_site(const Scenario& scenario, std::string site_id = "site");

// Same draw, every sample multiplied by `factor`.
RegularSeries scaled(const RegularSeries& series, double factor);

void write_power_csv(std::ostream& out, const RegularSeries& series);

}  // namespace scsf
