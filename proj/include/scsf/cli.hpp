#pragma once

#include <iosfwd>
#include <optional>

#include "scsf/config.hpp"

namespace scsf {

struct CliParse {
  std::optional<RunConfig> config;  // empty after --help or a usage error
  int status = 0;
};

// Defaults, then the --config file, then flags (flags win).
CliParse parse_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scsf
