#pragma once

#include <array>
#include <vector>

#include "svflow/grid.hpp"

namespace svf {

// Spatial Jacobian of a field, entries(i,j) = du_i/dx_j in voxel units.
// Entry arrays are indexed 3*i + j.
struct JacobianField {
    GridGeometry geometry;
    std::array<std::vector<double>, 9> entries;

    JacobianField() = default;
    explicit JacobianField(const GridGeometry& g) : geometry(g) {
        for (auto& e : entries) e.assign(g.voxel_count(), 0.0);
    }
};

struct BchdConfig {
    int truncation_order = 4;  // 1 reduces the series to plain summation

    void validate() const {
        if (truncation_order < 1 || truncation_order > 4)
            throw DataError("BchdConfig: truncation_order must be in [1,4]");
    }
};

// Central differences in the interior, one-sided on the faces.
// Requires dims >= 3 per axis.
JacobianField spatial_jacobian(const VectorField& u);

// Same stencil for one scalar lattice along one axis (0=x, 1=y, 2=z).
std::vector<double> axis_derivative(const GridGeometry& g, const std::vector<double>& data,
                                    int axis);

// [v,w](x) = Jv(x)*w(x) - Jw(x)*v(x).
// The sign convention is locked by the composition property
// exp(zeta(v,w)) ~ exp(v) o exp(w); see the tests.
VectorField lie_bracket(const VectorField& v, const VectorField& w);

// zeta(a,b) = a + b + 1/2 [a,b] + 1/12([a,[a,b]] + [b,[b,a]]) - 1/24 [b,[a,[a,b]]],
// truncated per cfg; order 1 returns a + b.
VectorField bchd_compose(const VectorField& v_prev, const VectorField& v_cur,
                         const BchdConfig& cfg = {});

// Smallest N with max|v| / 2^N <= 1/16 voxel, clamped to [4, 10].
int adaptive_squaring_steps(const VectorField& v);

// Scaling and squaring: phi <- id + v/2^steps, then phi <- phi o phi `steps`
// times. steps == 0 selects the adaptive default.
VectorField exponentiate(const VectorField& v, int steps = 0);

// exponentiate(-v, steps)
VectorField exponentiate_inverse(const VectorField& v, int steps = 0);

}  // namespace svf
