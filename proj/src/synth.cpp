#include "scsf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "scsf/error.hpp"

namespace scsf {

int Scenario::day_count() const { return static_cast<int>(std::lround(years * 365.0)); }

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidScenario, what); };
  if (!(years > 0.0) || day_count() < 1) fail("years must be positive");
  if (interval <= 0 || kSecondsPerDay % interval != 0) fail("interval must divide 86400");
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) fail("cloud_fraction must lie in [0, 1]");
  if (!(noise >= 0.0 && noise < 0.5)) fail("noise must lie in [0, 0.5)");
  if (!(beta > -1.0 && beta < 1.0)) fail("beta must lie in (-1, 1)");
  if (!(capacity_kw > 0.0)) fail("capacity must be positive");
  if (!(capacity_shift > 0.0)) fail("capacity_shift must be positive");
  if (!(missing_days >= 0.0 && missing_days < 1.0)) fail("missing_days must lie in [0, 1)");
  if (!(std::abs(latitude_deg) < 66.0)) fail("latitude must be below the polar circles");
  if (!start.ok()) fail("invalid start date");
}

SyntheticSite generate_site(const Scenario& sc, std::string site_id) {
  sc.validate();
  const int n = sc.day_count();
  const int m = kSecondsPerDay / sc.interval;
  const double pi = std::numbers::pi;
  const double lat = sc.latitude_deg * pi / 180.0;
  const auto start_doy =
      (std::chrono::sys_days{sc.start} - std::chrono::sys_days{sc.start.year() / std::chrono::January / 1}).count();

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SyntheticSite site;
  site.site_id = std::move(site_id);
  site.scenario = sc;
  site.clear_sky = Eigen::MatrixXd::Zero(m, n);
  site.cloudy.assign(static_cast<std::size_t>(n), false);
  site.series.start_date = sc.start;
  site.series.interval = sc.interval;
  site.series.values.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), std::nullopt);

  std::vector<double> transmission(static_cast<std::size_t>(m));
  for (int day = 0; day < n; ++day) {
    const double phase = 2.0 * pi * static_cast<double>((start_doy + day) % 365) / 365.0;
    const double decl = 23.44 * pi / 180.0 * std::sin(phase - 2.0 * pi * 81.0 / 365.0);
    const double degradation = std::pow(1.0 + sc.beta, static_cast<double>(day) / 365.0);
    const double shift = day < 365 ? sc.capacity_shift : 1.0;

    const bool cloudy = unif(rng) < sc.cloud_fraction;
    const bool missing = unif(rng) < sc.missing_days;
    site.cloudy[static_cast<std::size_t>(day)] = cloudy;
    std::fill(transmission.begin(), transmission.end(), 1.0);
    if (cloudy) {
      const double base = 0.15 + 0.55 * unif(rng);
      double ar = gauss(rng);
      for (int i = 0; i < m; ++i) {
        ar = 0.7 * ar + std::sqrt(1.0 - 0.49) * gauss(rng);
        transmission[static_cast<std::size_t>(i)] = std::clamp(base + 0.3 * ar, 0.03, 1.0);
      }
    }
    for (int i = 0; i < m; ++i) {
      const double hour = 24.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(m);
      const double hour_angle = (hour - 12.0) * pi / 12.0;
      const double cos_zenith = std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
      const double clear = cos_zenith > 0.0 ? sc.capacity_kw * degradation * std::pow(cos_zenith, 1.15) : 0.0;
      site.clear_sky(i, day) = clear;
      double value = clear * shift * transmission[static_cast<std::size_t>(i)];
      const double eps = gauss(rng);
      if (value > 0.0) value = std::max(0.0, value * (1.0 + sc.noise * eps));
      if (!missing) site.series.values[static_cast<std::size_t>(day) * static_cast<std::size_t>(m) + static_cast<std::size_t>(i)] = value;
    }
  }
  return site;
}

RegularSeries scaled(const RegularSeries& series, double factor) {
  RegularSeries out = series;
  for (auto& v : out.values) {
    if (v) *v *= factor;
  }
  return out;
}

void write_power_csv(std::ostream& out, const RegularSeries& series) {
  out << "timestamp,power\n";
  auto t = to_local_seconds(series.start_date);
  char buf[64];
  for (const auto& v : series.values) {
    out << format_timestamp(t) << ',';
    if (v) {
      std::snprintf(buf, sizeof(buf), "%.6f", *v);
      out << buf;
    }
    out << '\n';
    t += series.interval;
  }
}

}  // namespace scsf
