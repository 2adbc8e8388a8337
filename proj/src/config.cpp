#include "scsf/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "scsf/error.hpp"
#include "scsf/parallel.hpp"

namespace scsf {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': cannot parse '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v);
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  bad_value(key, v);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  bad_value(key, v);
}

template <class T, class Convert>
std::vector<T> to_list(const std::string& key, const std::string& v, Convert convert) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(convert(key, trim(item))));
  return out;
}

Date to_date(const std::string& key, const std::string& v) {
  const auto rec = parse_timestamp(v);
  if (!rec) bad_value(key, v);
  return date_of(rec->local_seconds);
}

#define SCSF_NUMBER(name, field) {name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); }}
#define SCSF_INTEGER(name, field) \
  {name, [](RunConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_integer(name, v)); }}
#define SCSF_BOOL(name, field) {name, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); }}

const std::map<std::string, Setter>& analysis_keys() {
  static const std::map<std::string, Setter> keys{
      SCSF_INTEGER("k", hp.k),
      SCSF_NUMBER("tau", hp.tau),
      SCSF_NUMBER("mu_left", hp.mu_left),
      SCSF_NUMBER("mu_right", hp.mu_right),
      SCSF_NUMBER("mu_year", hp.mu_year),
      SCSF_INTEGER("max_iters", hp.max_iters),
      SCSF_NUMBER("beta_tol", hp.beta_tol),
      SCSF_NUMBER("subproblem_tol", hp.subproblem_tol),
      {"degradation", [](RunConfig& c, const std::string& v) { c.hp.fit_degradation = to_bool("degradation", v); }},
      SCSF_INTEGER("interval", interval),
      SCSF_INTEGER("workers", workers),
      SCSF_NUMBER("min_day_coverage", scrub.min_day_coverage),
      SCSF_NUMBER("stuck_hours", scrub.stuck_hours),
      SCSF_NUMBER("daytime_level", scrub.daytime_level),
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
  };
  return keys;
}

const std::map<std::string, Setter>& tune_keys() {
  static const std::map<std::string, Setter> keys{
      SCSF_BOOL("grid", tune.grid),
      {"grid.k", [](RunConfig& c, const std::string& v) { c.tune.grid_spec.k = to_list<int>("grid.k", v, to_integer); }},
      {"grid.tau",
       [](RunConfig& c, const std::string& v) { c.tune.grid_spec.tau = to_list<double>("grid.tau", v, to_double); }},
      {"grid.mu_left",
       [](RunConfig& c, const std::string& v) { c.tune.grid_spec.mu_left = to_list<double>("grid.mu_left", v, to_double); }},
      {"grid.mu_right",
       [](RunConfig& c, const std::string& v) { c.tune.grid_spec.mu_right = to_list<double>("grid.mu_right", v, to_double); }},
      {"grid.mu_year",
       [](RunConfig& c, const std::string& v) { c.tune.grid_spec.mu_year = to_list<double>("grid.mu_year", v, to_double); }},
      SCSF_BOOL("sweep", tune.sweep),
      SCSF_NUMBER("tau_lo", tune.tau_lo),
      SCSF_NUMBER("tau_hi", tune.tau_hi),
      SCSF_NUMBER("tau_step", tune.tau_step),
      SCSF_NUMBER("nominal_tau", tune.nominal_tau),
  };
  return keys;
}

const std::map<std::string, Setter>& fleet_keys() {
  static const std::map<std::string, Setter> keys{
      {"external", [](RunConfig& c, const std::string& v) { c.external = v; }},
  };
  return keys;
}

const std::map<std::string, Setter>& synth_keys() {
  static const std::map<std::string, Setter> keys{
      SCSF_INTEGER("seed", synth.scenario.seed),
      SCSF_NUMBER("beta", synth.scenario.beta),
      SCSF_NUMBER("beta_std", synth.beta_std),
      SCSF_INTEGER("sites", synth.sites),
      SCSF_NUMBER("years", synth.scenario.years),
      SCSF_INTEGER("interval", synth.scenario.interval),
      SCSF_NUMBER("cloud_fraction", synth.scenario.cloud_fraction),
      SCSF_NUMBER("noise", synth.scenario.noise),
      SCSF_NUMBER("capacity_kw", synth.scenario.capacity_kw),
      SCSF_NUMBER("latitude", synth.scenario.latitude_deg),
      SCSF_NUMBER("capacity_shift", synth.scenario.capacity_shift),
      SCSF_NUMBER("missing_days", synth.scenario.missing_days),
      {"start", [](RunConfig& c, const std::string& v) { c.synth.scenario.start = to_date("start", v); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
  };
  return keys;
}

#undef SCSF_NUMBER
#undef SCSF_INTEGER
#undef SCSF_BOOL

// Keys each section accepts, in lookup order.
std::vector<const std::map<std::string, Setter>*> section_tables(const std::string& section) {
  if (section == "common" || section == "fit") return {&analysis_keys()};
  if (section == "tune") return {&analysis_keys(), &tune_keys()};
  if (section == "fleet") return {&analysis_keys(), &fleet_keys()};
  if (section == "synth") return {&synth_keys()};
  return {};
}

const Setter* find_setter(const std::string& section, const std::string& key) {
  for (const auto* table : section_tables(section)) {
    const auto it = table->find(key);
    if (it != table->end()) return &it->second;
  }
  return nullptr;
}

}  // namespace

int RunConfig::resolved_workers() const { return workers > 0 ? workers : default_workers(); }

void RunConfig::validate() const {
  if (command != "synth") {
    hp.validate();
    if (interval <= 0 || kSecondsPerDay % interval != 0) {
      throw Error(ErrorCode::IntervalInvalid, "interval must divide a day, got " + std::to_string(interval));
    }
    if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, command + " needs at least one input path");
  }
  if (workers < 0) throw Error(ErrorCode::InvalidArgument, "workers must be non-negative");
  if (command == "tune") {
    if (!tune.grid && !tune.sweep) throw Error(ErrorCode::InvalidArgument, "tune needs a grid or a sweep");
    if (tune.grid) tune.grid_spec.validate();
    if (tune.sweep) {
      const auto taus = tau_grid(tune.tau_lo, tune.tau_hi, tune.tau_step);
      const bool on_grid = std::any_of(taus.begin(), taus.end(),
                                       [&](double t) { return std::abs(t - tune.nominal_tau) <= 1e-9; });
      if (!on_grid) throw Error(ErrorCode::StepInvalid, "nominal tau is not on the sweep grid");
    }
  }
  if (command == "synth") {
    synth.scenario.validate();
    if (synth.sites < 1) throw Error(ErrorCode::InvalidScenario, "sites must be at least 1");
    if (!(synth.beta_std >= 0.0)) throw Error(ErrorCode::InvalidScenario, "beta_std must be non-negative");
  }
}

ConfigFile parse_config(std::istream& in) {
  ConfigFile out;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto cut = line.find_first_of("#;");
    line = trim(cut == std::string::npos ? line : line.substr(0, cut));
    if (line.empty()) continue;
    const auto where = " (line " + std::to_string(line_no) + ")";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::InvalidArgument, "malformed section header" + where);
      section = trim(line.substr(1, line.size() - 2));
      if (section_tables(section).empty()) {
        throw Error(ErrorCode::InvalidArgument, "unknown config section [" + section + "]" + where);
      }
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "expected key = value" + where);
    if (section.empty()) throw Error(ErrorCode::InvalidArgument, "key outside any section" + where);
    const auto key = trim(line.substr(0, eq));
    if (!find_setter(section, key)) {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "' in [" + section + "]" + where);
    }
    out[section][key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open config " + path.string());
  return parse_config(in);
}

void apply_config(RunConfig& cfg, const ConfigFile& file) {
  for (const std::string& section : {std::string("common"), cfg.command}) {
    if (section == "common" && cfg.command == "synth") continue;
    const auto it = file.find(section);
    if (it == file.end()) continue;
    for (const auto& [key, value] : it->second) (*find_setter(section, key))(cfg, value);
  }
}

}  // namespace scsf
