#pragma once

#include <array>
#include <cstdint>

#include "svflow/grid.hpp"
#include "svflow/rng.hpp"

namespace svf {

// Default displacement scale, calibrated so that the generated fields have a
// mean displacement of roughly 9.5% of the volume extent (see the calibrate
// subcommand of the CLI, which reproduces the sweep: scale 7.7 gives 9.5% on
// 32^3 with mean det J ~ 1.01 and no folding).
inline constexpr double kDefaultBsplineScale = 7.7;

struct BsplineDeformationSpec {
    std::array<int, 3> control_grid{3, 3, 3};
    int order = 5;
    double scale = kDefaultBsplineScale;  // voxels
    std::uint64_t seed = 0;

    void validate() const {
        for (int a = 0; a < 3; ++a)
            if (control_grid[a] < 2) throw DataError("control_grid must be >= 2 per axis");
        if (order < 1 || order > 7) throw DataError("b-spline order must be in [1,7]");
        if (!(scale > 0.0)) throw DataError("b-spline scale must be positive");
    }
};

// Centered cardinal B-spline of degree `order` at t, Cox-de Boor recurrence.
// Support is (-(order+1)/2, (order+1)/2).
double bspline_basis(int order, double t);

// u_d(x) = scale * sum_gamma gamma_d * prod_axis beta((x_ax - c_ax)/h_ax),
// control points on an even lattice spanning the domain, h = extent/(grid-1),
// gamma ~ N(0,1) i.i.d. from `rng`.
VectorField generate_bspline_deformation(const BsplineDeformationSpec& spec,
                                         const GridGeometry& geometry, Rng& rng);

}  // namespace svf
