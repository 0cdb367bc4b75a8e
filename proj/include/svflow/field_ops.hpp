#pragma once

#include <array>
#include <span>
#include <vector>

#include "svflow/grid.hpp"

namespace svf {

// Trilinear sampling with a clamped (replicate) border. Out-of-domain
// coordinates clamp to the nearest edge voxel; exact at grid nodes.
double trilinear_sample(const GridGeometry& g, const std::vector<double>& data, double x, double y,
                        double z);

inline double trilinear_sample(const ScalarVolume& vol, double x, double y, double z) {
    return trilinear_sample(vol.geometry, vol.data, x, y, z);
}

// Points given in voxel coordinates. Empty input yields an empty result;
// non-finite points are an error.
std::vector<double> interpolate_trilinear(const ScalarVolume& vol,
                                          std::span<const std::array<double, 3>> pts);

// out(x) = interp(img, x + u(x)) for every voxel x.
ScalarVolume warp(const ScalarVolume& img, const VectorField& phi);

// phi = phi_a o phi_b: u(x) = u_b(x) + interp(u_a, x + u_b(x)).
VectorField compose_deformations(const VectorField& phi_a, const VectorField& phi_b);

// Trilinear upsampling of each component onto the target grid, with per-axis
// magnitude rescale by the dims ratio so displacements stay correct in target
// voxel units. Downsampling requests are an error.
VectorField upsample_field(const VectorField& v, const GridGeometry& target);

// Trilinear resample onto an arbitrary grid covering the same domain
// (corner-aligned). Used by the CLI --resample path.
ScalarVolume resample_volume(const ScalarVolume& vol, const GridGeometry& target);

}  // namespace svf
