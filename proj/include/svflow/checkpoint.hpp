#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace svf {

// Checkpoint container: magic "SVCK", u32 version, a key=value config echo,
// then per-parameter records (name, shape, little-endian f32 payload).
// Round-trips must be bitwise stable.
struct CheckpointParam {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<CheckpointParam> params;

    std::string config_value(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace svf
