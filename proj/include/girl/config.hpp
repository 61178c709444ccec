#pragma once

#include <string>

#include "girl/gail.hpp"

namespace girl {

// Flat key=value training configuration. Keys are exactly the PPOConfig
// field names; '#' starts a comment; blank lines are skipped; unknown keys
// and malformed values are hard errors (no silent typos). Later lines win.
PPOConfig parse_ppo_config(const std::string& text, const std::string& origin,
                           const PPOConfig& base = {});
PPOConfig load_ppo_config(const std::string& path, const PPOConfig& base = {});

// Canonical serialization: one line per field, in declaration order, with
// enough digits that parsing the text reproduces the struct bit for bit.
std::string ppo_config_to_text(const PPOConfig& cfg);

}  // namespace girl
