#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace ipw::cli {

// Each command writes its CSVs under cfg.out_dir and a short summary to `log`.
void cmd_bloch(const RunConfig& cfg, std::ostream& log);
void cmd_aperture(const RunConfig& cfg, std::ostream& log);
void cmd_g2_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_g2_analyze(const RunConfig& cfg, const std::string& input, std::ostream& log);
void cmd_entangle(const RunConfig& cfg, std::ostream& log);

}  // namespace ipw::cli
