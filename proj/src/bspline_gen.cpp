#include "svflow/bspline_gen.hpp"

#include <cmath>
#include <vector>

namespace svf {

double bspline_basis(int order, double t) {
    if (order < 0 || order > 7) throw DataError("bspline_basis: order must be in [0,7]");
    // half-open box so shifted copies tile without double counting
    if (order == 0) return (t >= -0.5 && t < 0.5) ? 1.0 : 0.0;
    const double half = 0.5 * (order + 1);
    if (t <= -half || t >= half) return 0.0;
    // B_n(t) = ((t + (n+1)/2) B_{n-1}(t+1/2) + ((n+1)/2 - t) B_{n-1}(t-1/2)) / n
    return ((t + half) * bspline_basis(order - 1, t + 0.5) +
            (half - t) * bspline_basis(order - 1, t - 0.5)) /
           static_cast<double>(order);
}

VectorField generate_bspline_deformation(const BsplineDeformationSpec& spec,
                                         const GridGeometry& geometry, Rng& rng) {
    spec.validate();
    geometry.validate();
    const auto& dims = geometry.dims;
    const auto& grid = spec.control_grid;

    // gamma ordered x-fastest over the control lattice, components innermost
    const int n_ctrl = grid[0] * grid[1] * grid[2];
    std::vector<std::array<double, 3>> gamma(static_cast<std::size_t>(n_ctrl));
    for (auto& g : gamma)
        for (int d = 0; d < 3; ++d) g[d] = rng.normal();

    // per-axis basis tables: basis[axis][m * dims + x]
    std::array<std::vector<double>, 3> table;
    for (int ax = 0; ax < 3; ++ax) {
        const double h = static_cast<double>(dims[ax] - 1) / static_cast<double>(grid[ax] - 1);
        table[ax].resize(static_cast<std::size_t>(grid[ax]) * dims[ax]);
        for (int m = 0; m < grid[ax]; ++m) {
            const double c = m * h;
            for (int x = 0; x < dims[ax]; ++x)
                table[ax][static_cast<std::size_t>(m) * dims[ax] + x] =
                    bspline_basis(spec.order, (x - c) / h);
        }
    }

    VectorField u(geometry, FieldKind::displacement);
    std::size_t idx = 0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i, ++idx) {
                double acc[3] = {0.0, 0.0, 0.0};
                int m = 0;
                for (int mz = 0; mz < grid[2]; ++mz) {
                    const double bz = table[2][static_cast<std::size_t>(mz) * dims[2] + k];
                    if (bz == 0.0) {
                        m += grid[0] * grid[1];
                        continue;
                    }
                    for (int my = 0; my < grid[1]; ++my) {
                        const double byz = bz * table[1][static_cast<std::size_t>(my) * dims[1] + j];
                        for (int mx = 0; mx < grid[0]; ++mx, ++m) {
                            const double b =
                                byz * table[0][static_cast<std::size_t>(mx) * dims[0] + i];
                            if (b == 0.0) continue;
                            const auto& g = gamma[static_cast<std::size_t>(m)];
                            acc[0] += g[0] * b;
                            acc[1] += g[1] * b;
                            acc[2] += g[2] * b;
                        }
                    }
                }
                for (int d = 0; d < 3; ++d) u.comp[d][idx] = spec.scale * acc[d];
            }
    return u;
}

}  // namespace svf
