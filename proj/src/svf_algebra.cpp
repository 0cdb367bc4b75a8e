#include "svflow/svf_algebra.hpp"

#include <cmath>

#include "svflow/field_ops.hpp"

namespace svf {

namespace {

// d/dx_axis of one component, central interior, one-sided on faces
inline double derivative_1d(const std::vector<double>& c, const GridGeometry& g, int i, int j,
                            int k, int axis) {
    const int n = g.dims[axis];
    int p[3] = {i, j, k};
    if (p[axis] == 0) {
        int q[3] = {i, j, k};
        q[axis] = 1;
        return c[g.index(q[0], q[1], q[2])] - c[g.index(i, j, k)];
    }
    if (p[axis] == n - 1) {
        int q[3] = {i, j, k};
        q[axis] = n - 2;
        return c[g.index(i, j, k)] - c[g.index(q[0], q[1], q[2])];
    }
    int a[3] = {i, j, k}, b[3] = {i, j, k};
    a[axis] += 1;
    b[axis] -= 1;
    return 0.5 * (c[g.index(a[0], a[1], a[2])] - c[g.index(b[0], b[1], b[2])]);
}

}  // namespace

std::vector<double> axis_derivative(const GridGeometry& g, const std::vector<double>& data,
                                    int axis) {
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 3) throw DataError("axis_derivative: dims must be >= 3 per axis");
    std::vector<double> out(g.voxel_count());
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx)
                out[idx] = derivative_1d(data, g, i, j, k, axis);
    return out;
}

JacobianField spatial_jacobian(const VectorField& u) {
    const GridGeometry& g = u.geometry;
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 3) throw DataError("spatial_jacobian: dims must be >= 3 per axis");
    JacobianField jac(g);
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx)
                for (int ci = 0; ci < 3; ++ci)
                    for (int ax = 0; ax < 3; ++ax)
                        jac.entries[3 * ci + ax][idx] = derivative_1d(u.comp[ci], g, i, j, k, ax);
    return jac;
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
    require_same_geometry(v.geometry, w.geometry, "lie_bracket");
    const JacobianField jv = spatial_jacobian(v);
    const JacobianField jw = spatial_jacobian(w);
    VectorField out(v.geometry, FieldKind::velocity);
    const std::size_t n = v.geometry.voxel_count();
    for (std::size_t idx = 0; idx < n; ++idx)
        for (int ci = 0; ci < 3; ++ci) {
            // two separate dot products keep [v,v] == 0 and antisymmetry exact
            double jv_w = 0.0, jw_v = 0.0;
            for (int cj = 0; cj < 3; ++cj) {
                jv_w += jv.entries[3 * ci + cj][idx] * w.comp[cj][idx];
                jw_v += jw.entries[3 * ci + cj][idx] * v.comp[cj][idx];
            }
            out.comp[ci][idx] = jv_w - jw_v;
        }
    return out;
}

namespace {

VectorField axpy(double a, const VectorField& x, const VectorField& y) {
    VectorField out(y.geometry, y.kind);
    const std::size_t n = y.geometry.voxel_count();
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i) out.comp[c][i] = a * x.comp[c][i] + y.comp[c][i];
    return out;
}

}  // namespace

VectorField bchd_compose(const VectorField& v_prev, const VectorField& v_cur,
                         const BchdConfig& cfg) {
    cfg.validate();
    require_same_geometry(v_prev.geometry, v_cur.geometry, "bchd_compose");
    const GridGeometry& g = v_prev.geometry;
    const std::size_t n = g.voxel_count();

    VectorField out(g, FieldKind::velocity);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i) out.comp[c][i] = v_prev.comp[c][i] + v_cur.comp[c][i];
    if (cfg.truncation_order == 1) return out;

    const VectorField ab = lie_bracket(v_prev, v_cur);  // [a,b]
    out = axpy(0.5, ab, out);
    if (cfg.truncation_order == 2) return out;

    const VectorField aab = lie_bracket(v_prev, ab);  // [a,[a,b]]
    VectorField ba = negated(ab);                     // [b,a]
    const VectorField bba = lie_bracket(v_cur, ba);   // [b,[b,a]]
    out = axpy(1.0 / 12.0, aab, out);
    out = axpy(1.0 / 12.0, bba, out);
    if (cfg.truncation_order == 3) return out;

    const VectorField baab = lie_bracket(v_cur, aab);  // [b,[a,[a,b]]]
    out = axpy(-1.0 / 24.0, baab, out);
    return out;
}

int adaptive_squaring_steps(const VectorField& v) {
    // 1/16 voxel per initial step; the RK4 oracle suite sets this bound
    const double m = max_abs(v);
    int steps = 0;
    while (steps < 10 && m / static_cast<double>(1ULL << steps) > 0.0625) ++steps;
    return std::max(steps, 4);
}

VectorField exponentiate(const VectorField& v, int steps) {
    require_finite(v, "exponentiate");
    if (steps < 0) throw DataError("exponentiate: steps must be >= 0");
    if (steps == 0) steps = adaptive_squaring_steps(v);

    const GridGeometry& g = v.geometry;
    const std::size_t n = g.voxel_count();
    VectorField phi(g, FieldKind::displacement);
    const double scale = 1.0 / static_cast<double>(1ULL << steps);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i) phi.comp[c][i] = v.comp[c][i] * scale;
    for (int s = 0; s < steps; ++s) phi = compose_deformations(phi, phi);
    return phi;
}

VectorField exponentiate_inverse(const VectorField& v, int steps) {
    return exponentiate(negated(v), steps);
}

}  // namespace svf
