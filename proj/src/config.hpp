#pragma once

#include <string>

#include "simnet.hpp"

namespace eel {

// Builds a SimCfg from a JSON config. Absent keys keep their defaults;
// unknown keys and type mismatches throw std::invalid_argument naming the
// offending key path (e.g. "ccbf.k"). The result is already validated.
SimCfg parse_sim_cfg(const std::string& json_text);
SimCfg load_sim_cfg(const std::string& path);

}  // namespace eel
