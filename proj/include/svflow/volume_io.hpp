#pragma once

#include <filesystem>
#include <vector>

#include "svflow/grid.hpp"

namespace svf {

// SVOL container: magic "SVL1", u32 version=1, u32 dims[3], f32 spacing[3],
// u8 ncomponents (1 or 3), then ncomponents * (nx*ny*nz) little-endian f32,
// x-fastest, components planar in x,y,z order.
struct SvolPayload {
    GridGeometry geometry;
    int ncomponents = 1;
    std::vector<float> data;  // planar
};

void write_svol(const std::filesystem::path& path, const ScalarVolume& vol);
void write_svol(const std::filesystem::path& path, const VectorField& field);

SvolPayload read_svol(const std::filesystem::path& path);
ScalarVolume read_svol_scalar(const std::filesystem::path& path);
VectorField read_svol_field(const std::filesystem::path& path,
                            FieldKind kind = FieldKind::displacement);

}  // namespace svf
