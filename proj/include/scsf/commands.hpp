#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "scsf/config.hpp"
#include "scsf/fleet.hpp"
#include "scsf/synth.hpp"

namespace scsf {

inline constexpr int kExitAccepted = 0;
inline constexpr int kExitInvalid = 1;   // bad configuration or unreadable input
inline constexpr int kExitRejected = 2;  // analysis ran but nothing was accepted

// CSV -> regular grid -> day matrix -> scrub.
ScrubResult load_site_matrix(const std::filesystem::path& csv, int interval, const ScrubConfig& scrub);

// Directories contribute their *.csv files; a non-CSV file is a manifest
// listing one CSV path per line (relative to the manifest, '#' comments).
// Site ids are file stems. Throws NoSites when nothing is found.
std::vector<std::filesystem::path> discover_site_files(const std::vector<std::filesystem::path>& inputs);

// Site i uses seed + i; with beta_std > 0 each beta is drawn from
// normal(beta, beta_std) by a generator seeded with `seed`.
std::vector<SyntheticSite> synth_sites(const SynthSettings& settings);

// Each validates the config first, writes artifacts into cfg.out and, on
// failure, error.json. Returns an exit status.
int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_tune(const RunConfig& cfg, std::ostream& log);
int cmd_fleet(const RunConfig& cfg, std::ostream& log);
int cmd_synth(const RunConfig& cfg, std::ostream& log);

int run_command(const RunConfig& cfg, std::ostream& log);

}  // namespace scsf
