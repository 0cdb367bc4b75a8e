#include "svflow/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "svflow/errors.hpp"

namespace svf {

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_str(std::ofstream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::ifstream& is, const std::string& what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw DataError("checkpoint: truncated " + what);
    return v;
}

std::string get_str(std::ifstream& is, const std::string& what) {
    const std::uint32_t n = get_u32(is, what + " length");
    if (n > (1u << 24)) throw DataError("checkpoint: implausible " + what + " length");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw DataError("checkpoint: truncated " + what);
    return s;
}

}  // namespace

std::string Checkpoint::config_value(const std::string& key) const {
    for (const auto& [k, v] : config)
        if (k == key) return v;
    throw DataError("checkpoint: missing config key " + key);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os.write("SVCK", 4);
    put_u32(os, 1);
    put_u32(os, static_cast<std::uint32_t>(ckpt.config.size()));
    for (const auto& [k, v] : ckpt.config) {
        put_str(os, k);
        put_str(os, v);
    }
    put_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
        put_str(os, p.name);
        put_u32(os, static_cast<std::uint32_t>(p.shape.size()));
        std::size_t n = 1;
        for (int d : p.shape) {
            put_u32(os, static_cast<std::uint32_t>(d));
            n *= static_cast<std::size_t>(d);
        }
        if (n != p.data.size()) throw DataError("checkpoint: shape/data mismatch for " + p.name);
        os.write(reinterpret_cast<const char*>(p.data.data()),
                 static_cast<std::streamsize>(p.data.size() * sizeof(float)));
    }
    if (!os) throw DataError("checkpoint write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SVCK", 4) != 0)
        throw DataError("checkpoint: bad magic in " + path.string());
    const std::uint32_t version = get_u32(is, "version");
    if (version != 1) throw DataError("checkpoint: unsupported version");

    Checkpoint out;
    const std::uint32_t n_cfg = get_u32(is, "config count");
    for (std::uint32_t i = 0; i < n_cfg; ++i) {
        std::string k = get_str(is, "config key");
        std::string v = get_str(is, "config value");
        out.config.emplace_back(std::move(k), std::move(v));
    }
    const std::uint32_t n_params = get_u32(is, "param count");
    for (std::uint32_t i = 0; i < n_params; ++i) {
        CheckpointParam p;
        p.name = get_str(is, "param name");
        const std::uint32_t ndim = get_u32(is, "param ndim");
        if (ndim > 8) throw DataError("checkpoint: implausible ndim");
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            p.shape.push_back(static_cast<int>(get_u32(is, "param dim")));
            n *= static_cast<std::size_t>(p.shape.back());
        }
        p.data.resize(n);
        if (!is.read(reinterpret_cast<char*>(p.data.data()),
                     static_cast<std::streamsize>(n * sizeof(float))))
            throw DataError("checkpoint: truncated payload for " + p.name);
        out.params.push_back(std::move(p));
    }
    return out;
}

}  // namespace svf
