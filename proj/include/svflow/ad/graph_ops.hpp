#pragma once

#include <utility>

#include "svflow/ad/ops_basic.hpp"
#include "svflow/ad/ops_spatial.hpp"

namespace svf::ad {

// H(a,b) = (a+b, a-b), channel-paired feature transform
template <typename T>
std::pair<NodePtr<T>, NodePtr<T>> hadamard(Tape<T>& tape, const NodePtr<T>& a,
                                           const NodePtr<T>& b) {
    return {add(tape, a, b), sub(tape, a, b)};
}

// phi_a o phi_b as displacement fields: u_b + sample(u_a, x + u_b)
template <typename T>
NodePtr<T> compose_fields(Tape<T>& tape, const NodePtr<T>& ua, const NodePtr<T>& ub) {
    return add(tape, ub, warp_channels(tape, ua, ub));
}

// same adaptive rule as svf::adaptive_squaring_steps
inline int squaring_steps_for(double max_abs_v) {
    int steps = 0;
    while (steps < 10 && max_abs_v / static_cast<double>(1ULL << steps) > 0.0625) ++steps;
    return steps < 4 ? 4 : steps;
}

// scaling and squaring through the graph; steps == 0 selects the adaptive
// default from the current field values
template <typename T>
NodePtr<T> expmap(Tape<T>& tape, const NodePtr<T>& v, int steps = 0) {
    if (v->val.channels() != 3) throw DataError("expmap: field must have 3 channels");
    if (steps == 0) {
        double m = 0.0;
        for (const T x : v->val.v) m = std::max(m, std::fabs(static_cast<double>(x)));
        steps = squaring_steps_for(m);
    }
    auto u = scale(tape, v, 1.0 / static_cast<double>(1ULL << steps));
    for (int s = 0; s < steps; ++s) u = compose_fields(tape, u, u);
    return u;
}

// [v,w]_i = sum_j dv_i/dx_j w_j - dw_i/dx_j v_j, built from spatial_gradient
// slices so the whole expression stays differentiable
template <typename T>
NodePtr<T> lie_bracket(Tape<T>& tape, const NodePtr<T>& v, const NodePtr<T>& w) {
    if (v->val.channels() != 3 || w->val.channels() != 3)
        throw DataError("lie_bracket: fields must have 3 channels");
    auto jv = spatial_gradient(tape, v);
    auto jw = spatial_gradient(tape, w);
    std::vector<NodePtr<T>> rows;
    rows.reserve(3);
    for (int i = 0; i < 3; ++i) {
        NodePtr<T> acc;
        for (int j = 0; j < 3; ++j) {
            auto term = sub(tape,
                            mul(tape, slice_channels(tape, jv, 3 * i + j, 1),
                                slice_channels(tape, w, j, 1)),
                            mul(tape, slice_channels(tape, jw, 3 * i + j, 1),
                                slice_channels(tape, v, j, 1)));
            acc = acc ? add(tape, acc, term) : term;
        }
        rows.push_back(acc);
    }
    return concat_channels(tape, rows);
}

// zeta(a,b) truncated after the fourth-order term; order 1 is plain summation
template <typename T>
NodePtr<T> bchd(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b, int truncation_order) {
    if (truncation_order < 1 || truncation_order > 4)
        throw DataError("bchd: truncation_order must be in [1,4]");
    auto out = add(tape, a, b);
    if (truncation_order == 1) return out;
    auto ab = lie_bracket(tape, a, b);
    out = add(tape, out, scale(tape, ab, 0.5));
    if (truncation_order == 2) return out;
    auto aab = lie_bracket(tape, a, ab);
    auto bba = lie_bracket(tape, b, scale(tape, ab, -1.0));
    out = add(tape, out, scale(tape, add(tape, aab, bba), 1.0 / 12.0));
    if (truncation_order == 3) return out;
    auto baab = lie_bracket(tape, b, aab);
    return add(tape, out, scale(tape, baab, -1.0 / 24.0));
}

// mean over all entries of (a-b)^2
template <typename T>
NodePtr<T> mse(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    auto d = sub(tape, a, b);
    return mean(tape, mul(tape, d, d));
}

// eps_flow normalization: sum of squared component differences / voxel count
template <typename T>
NodePtr<T> flow_mse(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    auto d = sub(tape, a, b);
    return scale(tape, sum(tape, mul(tape, d, d)), 1.0 / static_cast<double>(a->val.volume()));
}

// global zero-mean normalized cross correlation as a scalar node
template <typename T>
NodePtr<T> ncc(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    auto am = sub_broadcast(tape, a, mean(tape, a));
    auto bm = sub_broadcast(tape, b, mean(tape, b));
    auto s01 = sum(tape, mul(tape, am, bm));
    auto s00 = sum(tape, mul(tape, am, am));
    auto s11 = sum(tape, mul(tape, bm, bm));
    return divide(tape, s01, sqrt_elem(tape, mul(tape, s00, s11)));
}

// L_smooth(u, n) = 1/(3|Omega|) sum |grad^n u|^2 with central differences
template <typename T>
NodePtr<T> smoothness(Tape<T>& tape, const NodePtr<T>& u, int order) {
    if (order != 1 && order != 2) throw DataError("smoothness: order must be 1 or 2");
    auto g = spatial_gradient(tape, u);
    if (order == 2) g = spatial_gradient(tape, g);
    const double norm = 1.0 / (3.0 * static_cast<double>(u->val.volume()));
    return scale(tape, sum(tape, mul(tape, g, g)), norm);
}

// (1-lambda) * (-NCC(warp(f1, phi), f0)) + lambda * L_smooth(phi, n)
template <typename T>
NodePtr<T> unsupervised_loss(Tape<T>& tape, const NodePtr<T>& f0, const NodePtr<T>& f1,
                             const NodePtr<T>& phi, double lambda, int smooth_order) {
    auto warped = warp_channels(tape, f1, phi);
    auto sim = scale(tape, ncc(tape, warped, f0), -(1.0 - lambda));
    if (lambda == 0.0) return sim;
    return add(tape, sim, scale(tape, smoothness(tape, phi, smooth_order), lambda));
}

}  // namespace svf::ad
