#include "svflow/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "SVOL I/O assumes a little-endian host");

namespace svf {

namespace {

void write_bytes(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_header(std::ofstream& os, const GridGeometry& g, std::uint8_t ncomp) {
    write_bytes(os, "SVL1", 4);
    const std::uint32_t version = 1;
    write_bytes(os, &version, 4);
    for (int a = 0; a < 3; ++a) {
        const std::uint32_t d = static_cast<std::uint32_t>(g.dims[a]);
        write_bytes(os, &d, 4);
    }
    for (int a = 0; a < 3; ++a) {
        const float s = static_cast<float>(g.spacing[a]);
        write_bytes(os, &s, 4);
    }
    write_bytes(os, &ncomp, 1);
}

void write_component(std::ofstream& os, const std::vector<double>& data) {
    std::vector<float> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) buf[i] = static_cast<float>(data[i]);
    write_bytes(os, buf.data(), buf.size() * sizeof(float));
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t offset,
                       const std::string& what) {
    throw DataError("SVOL read error in " + path.string() + " at byte offset " +
                    std::to_string(offset) + ": " + what);
}

}  // namespace

void write_svol(const std::filesystem::path& path, const ScalarVolume& vol) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    write_header(os, vol.geometry, 1);
    write_component(os, vol.data);
    if (!os) throw DataError("write failed: " + path.string());
}

void write_svol(const std::filesystem::path& path, const VectorField& field) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    write_header(os, field.geometry, 3);
    for (int a = 0; a < 3; ++a) write_component(os, field.comp[a]);
    if (!os) throw DataError("write failed: " + path.string());
}

SvolPayload read_svol(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path.string());

    char magic[4];
    if (!is.read(magic, 4)) fail(path, 0, "truncated magic");
    if (std::memcmp(magic, "SVL1", 4) != 0) fail(path, 0, "bad magic (expected SVL1)");
    std::uint32_t version = 0;
    if (!is.read(reinterpret_cast<char*>(&version), 4)) fail(path, 4, "truncated version");
    if (version != 1) fail(path, 4, "unsupported version " + std::to_string(version));

    SvolPayload out;
    std::uint32_t dims[3];
    if (!is.read(reinterpret_cast<char*>(dims), 12)) fail(path, 8, "truncated dims");
    float spacing[3];
    if (!is.read(reinterpret_cast<char*>(spacing), 12)) fail(path, 20, "truncated spacing");
    std::uint8_t ncomp = 0;
    if (!is.read(reinterpret_cast<char*>(&ncomp), 1)) fail(path, 32, "truncated ncomponents");
    if (ncomp != 1 && ncomp != 3)
        fail(path, 32, "ncomponents must be 1 or 3, got " + std::to_string(ncomp));

    for (int a = 0; a < 3; ++a) {
        out.geometry.dims[a] = static_cast<int>(dims[a]);
        out.geometry.spacing[a] = spacing[a];
    }
    out.geometry.validate();
    out.ncomponents = ncomp;

    const std::size_t n = out.geometry.voxel_count() * ncomp;
    out.data.resize(n);
    if (!is.read(reinterpret_cast<char*>(out.data.data()),
                 static_cast<std::streamsize>(n * sizeof(float))))
        fail(path, 33, "truncated payload (expected " + std::to_string(n * sizeof(float)) +
                           " bytes)");
    return out;
}

ScalarVolume read_svol_scalar(const std::filesystem::path& path) {
    SvolPayload p = read_svol(path);
    if (p.ncomponents != 1)
        throw DataError(path.string() + ": expected a scalar volume, found " +
                        std::to_string(p.ncomponents) + " components");
    ScalarVolume vol(p.geometry);
    for (std::size_t i = 0; i < p.data.size(); ++i) vol.data[i] = p.data[i];
    return vol;
}

VectorField read_svol_field(const std::filesystem::path& path, FieldKind kind) {
    SvolPayload p = read_svol(path);
    if (p.ncomponents != 3)
        throw DataError(path.string() + ": expected a 3-component field, found " +
                        std::to_string(p.ncomponents) + " component(s)");
    VectorField f(p.geometry, kind);
    const std::size_t n = p.geometry.voxel_count();
    for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < n; ++i) f.comp[a][i] = p.data[static_cast<std::size_t>(a) * n + i];
    return f;
}

}  // namespace svf
