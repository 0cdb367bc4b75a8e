#include "svflow/field_ops.hpp"

#include <cmath>

namespace svf {

double trilinear_sample(const GridGeometry& g, const std::vector<double>& data, double x, double y,
                        double z) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    // written so non-finite coordinates clamp to 0 instead of feeding an
    // undefined float-to-int cast
    x = x > 0.0 ? (x < nx - 1 ? x : nx - 1) : 0.0;
    y = y > 0.0 ? (y < ny - 1 ? y : ny - 1) : 0.0;
    z = z > 0.0 ? (z < nz - 1 ? z : nz - 1) : 0.0;
    int i0 = static_cast<int>(x);
    int j0 = static_cast<int>(y);
    int k0 = static_cast<int>(z);
    if (i0 > nx - 2) i0 = nx - 2;
    if (j0 > ny - 2) j0 = ny - 2;
    if (k0 > nz - 2) k0 = nz - 2;
    const double fx = x - i0, fy = y - j0, fz = z - k0;
    // two-sided weights keep grid-node samples exact
    const double gx = 1.0 - fx, gy = 1.0 - fy, gz = 1.0 - fz;
    const std::size_t s0 = g.index(i0, j0, k0);
    const std::size_t dx = 1;
    const std::size_t dy = static_cast<std::size_t>(nx);
    const std::size_t dz = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    const double c00 = data[s0] * gx + data[s0 + dx] * fx;
    const double c10 = data[s0 + dy] * gx + data[s0 + dx + dy] * fx;
    const double c01 = data[s0 + dz] * gx + data[s0 + dx + dz] * fx;
    const double c11 = data[s0 + dy + dz] * gx + data[s0 + dx + dy + dz] * fx;
    const double c0 = c00 * gy + c10 * fy;
    const double c1 = c01 * gy + c11 * fy;
    return c0 * gz + c1 * fz;
}

std::vector<double> interpolate_trilinear(const ScalarVolume& vol,
                                          std::span<const std::array<double, 3>> pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
            throw NumericalError("interpolate_trilinear: non-finite query point");
        out.push_back(trilinear_sample(vol, p[0], p[1], p[2]));
    }
    return out;
}

ScalarVolume warp(const ScalarVolume& img, const VectorField& phi) {
    require_same_geometry(img.geometry, phi.geometry, "warp");
    const GridGeometry& g = img.geometry;
    ScalarVolume out(g);
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                out.data[idx] = trilinear_sample(img, i + phi.comp[0][idx], j + phi.comp[1][idx],
                                                 k + phi.comp[2][idx]);
            }
    return out;
}

VectorField compose_deformations(const VectorField& phi_a, const VectorField& phi_b) {
    require_same_geometry(phi_a.geometry, phi_b.geometry, "compose_deformations");
    const GridGeometry& g = phi_a.geometry;
    VectorField out(g, FieldKind::displacement);
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx) {
                const double x = i + phi_b.comp[0][idx];
                const double y = j + phi_b.comp[1][idx];
                const double z = k + phi_b.comp[2][idx];
                for (int a = 0; a < 3; ++a)
                    out.comp[a][idx] =
                        phi_b.comp[a][idx] + trilinear_sample(g, phi_a.comp[a], x, y, z);
            }
    return out;
}

VectorField upsample_field(const VectorField& v, const GridGeometry& target) {
    target.validate();
    for (int a = 0; a < 3; ++a)
        if (target.dims[a] < v.geometry.dims[a])
            throw DataError("upsample_field: target dims smaller than source");
    if (target.dims == v.geometry.dims) {
        VectorField out = v;
        out.geometry = target;
        return out;
    }
    const GridGeometry& s = v.geometry;
    VectorField out(target, v.kind);
    std::array<double, 3> ratio{}, map{};
    for (int a = 0; a < 3; ++a) {
        ratio[a] = static_cast<double>(target.dims[a]) / static_cast<double>(s.dims[a]);
        map[a] = target.dims[a] > 1
                     ? static_cast<double>(s.dims[a] - 1) / static_cast<double>(target.dims[a] - 1)
                     : 0.0;
    }
    std::size_t idx = 0;
    for (int k = 0; k < target.dims[2]; ++k)
        for (int j = 0; j < target.dims[1]; ++j)
            for (int i = 0; i < target.dims[0]; ++i, ++idx) {
                const double x = i * map[0], y = j * map[1], z = k * map[2];
                for (int a = 0; a < 3; ++a)
                    out.comp[a][idx] = ratio[a] * trilinear_sample(s, v.comp[a], x, y, z);
            }
    return out;
}

ScalarVolume resample_volume(const ScalarVolume& vol, const GridGeometry& target) {
    target.validate();
    const GridGeometry& s = vol.geometry;
    ScalarVolume out(target);
    std::array<double, 3> map{};
    for (int a = 0; a < 3; ++a)
        map[a] = target.dims[a] > 1
                     ? static_cast<double>(s.dims[a] - 1) / static_cast<double>(target.dims[a] - 1)
                     : 0.0;
    std::size_t idx = 0;
    for (int k = 0; k < target.dims[2]; ++k)
        for (int j = 0; j < target.dims[1]; ++j)
            for (int i = 0; i < target.dims[0]; ++i, ++idx)
                out.data[idx] = trilinear_sample(vol, i * map[0], j * map[1], k * map[2]);
    return out;
}

}  // namespace svf
