#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scsf/ingest.hpp"
#include "scsf/model.hpp"
#include "scsf/synth.hpp"
#include "scsf/tuning.hpp"

namespace scsf {

struct TuneSettings {
  bool grid = false;
  GridSpec grid_spec = GridSpec::standard();
  bool sweep = false;
  double tau_lo = kTauLo;
  double tau_hi = kTauHi;
  double tau_step = kTauStep;
  double nominal_tau = kNominalTau;
};

struct SynthSettings {
  Scenario scenario;
  int sites = 1;
  double beta_std = 0.0;  // > 0 draws each site's beta from normal(scenario.beta, beta_std)
};

struct RunConfig {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out = ".";
  int workers = 0;  // 0: SCSF_WORKERS or hardware concurrency
  int interval = kDefaultIntervalSeconds;
  HyperParams hp;
  ScrubConfig scrub;
  TuneSettings tune;
  std::optional<std::filesystem::path> external;
  SynthSettings synth;

  int resolved_workers() const;
  // Throws the matching validation error; runs before any compute.
  void validate() const;
};

// Flat key = value text with [section] headers. Sections: common, fit, tune,
// fleet, synth. '#' and ';' start comments. Unknown sections or keys throw
// InvalidArgument naming the line.
using ConfigFile = std::map<std::string, std::map<std::string, std::string>>;

ConfigFile parse_config(std::istream& in);
ConfigFile load_config(const std::filesystem::path& path);

// Applies [common] and then the section for cfg.command.
void apply_config(RunConfig& cfg, const ConfigFile& file);

}  // namespace scsf
