#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "svflow/net_config.hpp"
#include "svflow/train_config.hpp"

namespace svf {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat key=value text, '#' comments and blank lines allowed.
KeyValues parse_key_values(std::istream& is);

// Applies keys to the two configs; unknown keys are errors.
void apply_config(const KeyValues& kv, NetConfig& net, TrainConfig& train);

// Canonical serialization (fixed key order) used for config files, the
// checkpoint config echo and provenance hashing.
KeyValues net_config_entries(const NetConfig& net);
KeyValues train_config_entries(const TrainConfig& train);
std::string config_text(const NetConfig& net, const TrainConfig& train);
std::uint64_t config_hash(const NetConfig& net, const TrainConfig& train);

NetConfig net_config_from_entries(const KeyValues& kv);  // missing keys keep defaults

}  // namespace svf
