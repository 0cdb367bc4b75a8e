#pragma once

#include <algorithm>
#include <cmath>

#include "svflow/ad/tensor.hpp"
#include "svflow/parallel.hpp"

namespace svf::ad {

// ---------------------------------------------------------------------------
// conv3d: 3x3x3 kernels, zero padding 1, stride 1 or 2.
// x {Ci,D,H,W}, w {Co,Ci,3,3,3}, b {Co} -> out {Co,Do,Ho,Wo}
// ---------------------------------------------------------------------------

namespace detail {

inline int conv_out_dim(int n, int stride) { return stride == 1 ? n : (n - 1) / 2 + 1; }

template <typename T>
void conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                    Tensor<T>& out) {
    const int Ci = x.channels(), D = x.nz(), H = x.ny(), W = x.nx();
    const int Co = out.channels(), Do = out.nz(), Ho = out.ny(), Wo = out.nx();
    const std::int64_t in_vol = x.volume(), out_vol = out.volume();

    parallel_for(static_cast<std::int64_t>(Co) * Do, 4, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const int co = static_cast<int>(p / Do);
            const int zo = static_cast<int>(p % Do);
            T* out_plane = out.v.data() + co * out_vol + static_cast<std::int64_t>(zo) * Ho * Wo;
            const T bias = b.v[static_cast<std::size_t>(co)];
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i)
                out_plane[i] = bias;
            for (int ci = 0; ci < Ci; ++ci) {
                const T* in_c = x.v.data() + ci * in_vol;
                const T* w_cc = w.v.data() + (static_cast<std::int64_t>(co) * Ci + ci) * 27;
                for (int kz = 0; kz < 3; ++kz) {
                    const int zi = stride * zo + kz - 1;
                    if (zi < 0 || zi >= D) continue;
                    const T* in_z = in_c + static_cast<std::int64_t>(zi) * H * W;
                    for (int yo = 0; yo < Ho; ++yo) {
                        T* out_row = out_plane + static_cast<std::int64_t>(yo) * Wo;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int yi = stride * yo + ky - 1;
                            if (yi < 0 || yi >= H) continue;
                            const T* in_row = in_z + static_cast<std::int64_t>(yi) * W;
                            const T* w_k = w_cc + (kz * 3 + ky) * 3;
                            for (int kx = 0; kx < 3; ++kx) {
                                const T wv = w_k[kx];
                                if (stride == 1) {
                                    const int lo = std::max(0, 1 - kx);
                                    const int hi = std::min(Wo, W + 1 - kx);
                                    const T* src = in_row + kx - 1;
                                    for (int xo = lo; xo < hi; ++xo)
                                        out_row[xo] += wv * src[xo];
                                } else {
                                    for (int xo = 0; xo < Wo; ++xo) {
                                        const int xi = 2 * xo + kx - 1;
                                        if (xi < 0 || xi >= W) continue;
                                        out_row[xo] += wv * in_row[xi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

template <typename T>
void conv3d_backward_input(const Tensor<T>& g, const Tensor<T>& w, int stride, int Ci, int D,
                           int H, int W, Tensor<T>& dx) {
    const int Co = g.channels(), Do = g.nz(), Ho = g.ny(), Wo = g.nx();
    const std::int64_t g_vol = g.volume(), in_vol = static_cast<std::int64_t>(D) * H * W;

    parallel_for(static_cast<std::int64_t>(Ci) * D, 4, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const int ci = static_cast<int>(p / D);
            const int z = static_cast<int>(p % D);
            T* dx_plane = dx.v.data() + ci * in_vol + static_cast<std::int64_t>(z) * H * W;
            for (int co = 0; co < Co; ++co) {
                const T* g_c = g.v.data() + co * g_vol;
                const T* w_cc = w.v.data() + (static_cast<std::int64_t>(co) * Ci + ci) * 27;
                for (int kz = 0; kz < 3; ++kz) {
                    const int t = z - kz + 1;
                    int zo;
                    if (stride == 1) {
                        zo = t;
                    } else {
                        if (t < 0 || (t & 1)) continue;
                        zo = t / 2;
                    }
                    if (zo < 0 || zo >= Do) continue;
                    const T* g_z = g_c + static_cast<std::int64_t>(zo) * Ho * Wo;
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int y = 0; y < H; ++y) {
                            const int ty = y - ky + 1;
                            int yo;
                            if (stride == 1) {
                                yo = ty;
                            } else {
                                if (ty < 0 || (ty & 1)) continue;
                                yo = ty / 2;
                            }
                            if (yo < 0 || yo >= Ho) continue;
                            T* dx_row = dx_plane + static_cast<std::int64_t>(y) * W;
                            const T* g_row = g_z + static_cast<std::int64_t>(yo) * Wo;
                            const T* w_k = w_cc + (kz * 3 + ky) * 3;
                            for (int kx = 0; kx < 3; ++kx) {
                                const T wv = w_k[kx];
                                if (stride == 1) {
                                    const int lo = std::max(0, kx - 1);
                                    const int hi = std::min(W, Wo + kx - 1);
                                    const T* src = g_row - kx + 1;
                                    for (int xx = lo; xx < hi; ++xx)
                                        dx_row[xx] += wv * src[xx];
                                } else {
                                    for (int xo = 0; xo < Wo; ++xo) {
                                        const int xx = 2 * xo + kx - 1;
                                        if (xx < 0 || xx >= W) continue;
                                        dx_row[xx] += wv * g_row[xo];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

template <typename T>
void conv3d_backward_weights(const Tensor<T>& g, const Tensor<T>& x, int stride, Tensor<T>& dw,
                             Tensor<T>& db) {
    const int Ci = x.channels(), D = x.nz(), H = x.ny(), W = x.nx();
    const int Co = g.channels(), Do = g.nz(), Ho = g.ny(), Wo = g.nx();
    const std::int64_t g_vol = g.volume(), in_vol = x.volume();

    parallel_for(Co, 1, [&](std::int64_t c0, std::int64_t c1) {
        for (std::int64_t co = c0; co < c1; ++co) {
            const T* g_c = g.v.data() + co * g_vol;
            T bias_acc = T(0);
            for (std::int64_t i = 0; i < g_vol; ++i) bias_acc += g_c[i];
            db.v[static_cast<std::size_t>(co)] += bias_acc;
            for (int ci = 0; ci < Ci; ++ci) {
                const T* in_c = x.v.data() + ci * in_vol;
                T* dw_cc = dw.v.data() + (co * Ci + ci) * 27;
                for (int kz = 0; kz < 3; ++kz)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            T acc = T(0);
                            for (int zo = 0; zo < Do; ++zo) {
                                const int zi = stride * zo + kz - 1;
                                if (zi < 0 || zi >= D) continue;
                                const T* in_z = in_c + static_cast<std::int64_t>(zi) * H * W;
                                const T* g_z = g_c + static_cast<std::int64_t>(zo) * Ho * Wo;
                                for (int yo = 0; yo < Ho; ++yo) {
                                    const int yi = stride * yo + ky - 1;
                                    if (yi < 0 || yi >= H) continue;
                                    const T* in_row = in_z + static_cast<std::int64_t>(yi) * W;
                                    const T* g_row = g_z + static_cast<std::int64_t>(yo) * Wo;
                                    if (stride == 1) {
                                        const int lo = std::max(0, 1 - kx);
                                        const int hi = std::min(Wo, W + 1 - kx);
                                        const T* src = in_row + kx - 1;
                                        for (int xo = lo; xo < hi; ++xo)
                                            acc += g_row[xo] * src[xo];
                                    } else {
                                        for (int xo = 0; xo < Wo; ++xo) {
                                            const int xi = 2 * xo + kx - 1;
                                            if (xi < 0 || xi >= W) continue;
                                            acc += g_row[xo] * in_row[xi];
                                        }
                                    }
                                }
                            }
                            dw_cc[(kz * 3 + ky) * 3 + kx] += acc;
                        }
            }
        }
    });
}

}  // namespace detail

template <typename T>
NodePtr<T> conv3d(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  int stride = 1) {
    if (stride != 1 && stride != 2) throw DataError("conv3d: stride must be 1 or 2");
    if (!x->val.is_spatial()) throw DataError("conv3d: input must be 4-D");
    if (w->val.shape.size() != 5 || w->val.shape[2] != 3 || w->val.shape[3] != 3 ||
        w->val.shape[4] != 3)
        throw DataError("conv3d: weights must be {Co,Ci,3,3,3}");
    if (w->val.shape[1] != x->val.channels())
        throw DataError("conv3d: weight Ci does not match input channels");
    const int Co = w->val.shape[0];
    if (b->val.shape != std::vector<int>{Co}) throw DataError("conv3d: bias must be {Co}");

    auto out = make_leaf(Tensor<T>({Co, detail::conv_out_dim(x->val.nz(), stride),
                                    detail::conv_out_dim(x->val.ny(), stride),
                                    detail::conv_out_dim(x->val.nx(), stride)}));
    detail::conv3d_forward(x->val, w->val, b->val, stride, out->val);
    if (tape.should_record({x, w, b}))
        tape.record(out, {x, w, b}, [out, x, w, b, stride] {
            if (x->requires_grad)
                detail::conv3d_backward_input(out->grad, w->val, stride, x->val.channels(),
                                              x->val.nz(), x->val.ny(), x->val.nx(), x->grad);
            if (w->requires_grad || b->requires_grad)
                detail::conv3d_backward_weights(out->grad, x->val, stride, w->grad, b->grad);
        });
    return out;
}

// ---------------------------------------------------------------------------
// upsample2x: trilinear, corner-aligned coordinates, output dims exactly 2x.
// ---------------------------------------------------------------------------

namespace detail {

struct AxisMap {
    std::vector<int> i0;
    std::vector<double> f;
};

inline AxisMap upsample_axis_map(int n_in, int n_out) {
    AxisMap m;
    m.i0.resize(static_cast<std::size_t>(n_out));
    m.f.resize(static_cast<std::size_t>(n_out));
    const double r = n_out > 1 ? static_cast<double>(n_in - 1) / (n_out - 1) : 0.0;
    for (int o = 0; o < n_out; ++o) {
        double s = o * r;
        int i0 = static_cast<int>(s);
        if (i0 > n_in - 2) i0 = n_in - 2;
        m.i0[static_cast<std::size_t>(o)] = i0;
        m.f[static_cast<std::size_t>(o)] = s - i0;
    }
    return m;
}

}  // namespace detail

template <typename T>
NodePtr<T> upsample2x(Tape<T>& tape, const NodePtr<T>& x) {
    if (!x->val.is_spatial()) throw DataError("upsample2x: input must be 4-D");
    const int C = x->val.channels(), D = x->val.nz(), H = x->val.ny(), W = x->val.nx();
    const int Do = 2 * D, Ho = 2 * H, Wo = 2 * W;
    auto out = make_leaf(Tensor<T>({C, Do, Ho, Wo}));

    const auto mz = detail::upsample_axis_map(D, Do);
    const auto my = detail::upsample_axis_map(H, Ho);
    const auto mx = detail::upsample_axis_map(W, Wo);
    const std::int64_t in_vol = x->val.volume(), out_vol = out->val.volume();

    parallel_for(static_cast<std::int64_t>(C) * Do, 8, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const int c = static_cast<int>(p / Do);
            const int zo = static_cast<int>(p % Do);
            const T* in_c = x->val.v.data() + c * in_vol;
            T* out_row0 = out->val.v.data() + c * out_vol + static_cast<std::int64_t>(zo) * Ho * Wo;
            const int z0 = mz.i0[static_cast<std::size_t>(zo)];
            const T fz = static_cast<T>(mz.f[static_cast<std::size_t>(zo)]);
            const T gz = T(1) - fz;
            for (int yo = 0; yo < Ho; ++yo) {
                const int y0 = my.i0[static_cast<std::size_t>(yo)];
                const T fy = static_cast<T>(my.f[static_cast<std::size_t>(yo)]);
                const T gy = T(1) - fy;
                const T* r00 = in_c + (static_cast<std::int64_t>(z0) * H + y0) * W;
                const T* r10 = r00 + W;
                const T* r01 = r00 + static_cast<std::int64_t>(H) * W;
                const T* r11 = r01 + W;
                T* out_row = out_row0 + static_cast<std::int64_t>(yo) * Wo;
                for (int xo = 0; xo < Wo; ++xo) {
                    const int x0 = mx.i0[static_cast<std::size_t>(xo)];
                    const T fx = static_cast<T>(mx.f[static_cast<std::size_t>(xo)]);
                    const T gx = T(1) - fx;
                    const T c00 = r00[x0] * gx + r00[x0 + 1] * fx;
                    const T c10 = r10[x0] * gx + r10[x0 + 1] * fx;
                    const T c01 = r01[x0] * gx + r01[x0 + 1] * fx;
                    const T c11 = r11[x0] * gx + r11[x0 + 1] * fx;
                    out_row[xo] = (c00 * gy + c10 * fy) * gz + (c01 * gy + c11 * fy) * fz;
                }
            }
        }
    });

    if (tape.should_record({x}))
        tape.record(out, {x}, [out, x, mz, my, mx] {
            const int C = x->val.channels(), H = x->val.ny(), W = x->val.nx();
            const int Do = out->val.nz(), Ho = out->val.ny(), Wo = out->val.nx();
            const std::int64_t in_vol = x->val.volume(), out_vol = out->val.volume();
            for (int c = 0; c < C; ++c) {
                T* dx_c = x->grad.v.data() + c * in_vol;
                const T* g_c = out->grad.v.data() + c * out_vol;
                for (int zo = 0; zo < Do; ++zo) {
                    const int z0 = mz.i0[static_cast<std::size_t>(zo)];
                    const T fz = static_cast<T>(mz.f[static_cast<std::size_t>(zo)]);
                    for (int yo = 0; yo < Ho; ++yo) {
                        const int y0 = my.i0[static_cast<std::size_t>(yo)];
                        const T fy = static_cast<T>(my.f[static_cast<std::size_t>(yo)]);
                        const T* g_row = g_c + (static_cast<std::int64_t>(zo) * Ho + yo) * Wo;
                        T* d00 = dx_c + (static_cast<std::int64_t>(z0) * H + y0) * W;
                        T* d10 = d00 + W;
                        T* d01 = d00 + static_cast<std::int64_t>(H) * W;
                        T* d11 = d01 + W;
                        for (int xo = 0; xo < Wo; ++xo) {
                            const int x0 = mx.i0[static_cast<std::size_t>(xo)];
                            const T fx = static_cast<T>(mx.f[static_cast<std::size_t>(xo)]);
                            const T g = g_row[xo];
                            const T gx = T(1) - fx, gy = T(1) - fy, gz = T(1) - fz;
                            d00[x0] += g * gx * gy * gz;
                            d00[x0 + 1] += g * fx * gy * gz;
                            d10[x0] += g * gx * fy * gz;
                            d10[x0 + 1] += g * fx * fy * gz;
                            d01[x0] += g * gx * gy * fz;
                            d01[x0 + 1] += g * fx * gy * fz;
                            d11[x0] += g * gx * fy * fz;
                            d11[x0 + 1] += g * fx * fy * fz;
                        }
                    }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// warp_channels: out[c](p) = sample(x[c], p + u(p)), clamped border,
// differentiable w.r.t. both the image channels and the displacement.
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> warp_channels(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& u) {
    if (!x->val.is_spatial() || !u->val.is_spatial())
        throw DataError("warp_channels: inputs must be 4-D");
    if (u->val.channels() != 3) throw DataError("warp_channels: displacement must have 3 channels");
    if (u->val.nz() != x->val.nz() || u->val.ny() != x->val.ny() || u->val.nx() != x->val.nx())
        throw DataError("warp_channels: spatial shape mismatch");

    const int C = x->val.channels(), D = x->val.nz(), H = x->val.ny(), W = x->val.nx();
    const std::int64_t vol = x->val.volume();
    auto out = make_leaf(Tensor<T>(x->val.shape));

    parallel_for(D, 2, [&](std::int64_t z0p, std::int64_t z1p) {
        for (std::int64_t k = z0p; k < z1p; ++k)
            for (std::int64_t j = 0; j < H; ++j)
                for (std::int64_t i = 0; i < W; ++i) {
                    const std::int64_t idx = (k * H + j) * W + i;
                    double px = static_cast<double>(i) + u->val.v[idx];
                    double py = static_cast<double>(j) + u->val.v[vol + idx];
                    double pz = static_cast<double>(k) + u->val.v[2 * vol + idx];
                    // non-finite coordinates clamp to 0; the NaN still reaches
                    // the loss, which aborts cleanly
                    px = px > 0.0 ? (px < W - 1 ? px : W - 1) : 0.0;
                    py = py > 0.0 ? (py < H - 1 ? py : H - 1) : 0.0;
                    pz = pz > 0.0 ? (pz < D - 1 ? pz : D - 1) : 0.0;
                    int i0 = std::min(static_cast<int>(px), W - 2);
                    int j0 = std::min(static_cast<int>(py), H - 2);
                    int k0 = std::min(static_cast<int>(pz), D - 2);
                    const T fx = static_cast<T>(px - i0), gx = T(1) - fx;
                    const T fy = static_cast<T>(py - j0), gy = T(1) - fy;
                    const T fz = static_cast<T>(pz - k0), gz = T(1) - fz;
                    const std::int64_t s0 = (static_cast<std::int64_t>(k0) * H + j0) * W + i0;
                    for (int c = 0; c < C; ++c) {
                        const T* d = x->val.v.data() + c * vol;
                        const T c00 = d[s0] * gx + d[s0 + 1] * fx;
                        const T c10 = d[s0 + W] * gx + d[s0 + W + 1] * fx;
                        const T c01 = d[s0 + static_cast<std::int64_t>(H) * W] * gx +
                                      d[s0 + static_cast<std::int64_t>(H) * W + 1] * fx;
                        const T c11 = d[s0 + static_cast<std::int64_t>(H) * W + W] * gx +
                                      d[s0 + static_cast<std::int64_t>(H) * W + W + 1] * fx;
                        out->val.v[c * vol + idx] = (c00 * gy + c10 * fy) * gz + (c01 * gy + c11 * fy) * fz;
                    }
                }
    });

    if (tape.should_record({x, u}))
        tape.record(out, {x, u}, [out, x, u] {
            const int C = x->val.channels(), D = x->val.nz(), H = x->val.ny(), W = x->val.nx();
            const std::int64_t vol = x->val.volume();
            const std::int64_t HW = static_cast<std::int64_t>(H) * W;
            for (std::int64_t k = 0; k < D; ++k)
                for (std::int64_t j = 0; j < H; ++j)
                    for (std::int64_t i = 0; i < W; ++i) {
                        const std::int64_t idx = (k * H + j) * W + i;
                        const double rx = static_cast<double>(i) + u->val.v[idx];
                        const double ry = static_cast<double>(j) + u->val.v[vol + idx];
                        const double rz = static_cast<double>(k) + u->val.v[2 * vol + idx];
                        const bool inx = rx > 0.0 && rx < W - 1;
                        const bool iny = ry > 0.0 && ry < H - 1;
                        const bool inz = rz > 0.0 && rz < D - 1;
                        const double px = rx > 0.0 ? (rx < W - 1 ? rx : W - 1) : 0.0;
                        const double py = ry > 0.0 ? (ry < H - 1 ? ry : H - 1) : 0.0;
                        const double pz = rz > 0.0 ? (rz < D - 1 ? rz : D - 1) : 0.0;
                        const int i0 = std::min(static_cast<int>(px), W - 2);
                        const int j0 = std::min(static_cast<int>(py), H - 2);
                        const int k0 = std::min(static_cast<int>(pz), D - 2);
                        const T fx = static_cast<T>(px - i0), gx = T(1) - fx;
                        const T fy = static_cast<T>(py - j0), gy = T(1) - fy;
                        const T fz = static_cast<T>(pz - k0), gz = T(1) - fz;
                        const std::int64_t s0 = (static_cast<std::int64_t>(k0) * H + j0) * W + i0;
                        T du0 = T(0), du1 = T(0), du2 = T(0);
                        for (int c = 0; c < C; ++c) {
                            const T g = out->grad.v[c * vol + idx];
                            if (g == T(0)) continue;
                            const T* d = x->val.v.data() + c * vol;
                            if (x->requires_grad) {
                                T* dd = x->grad.v.data() + c * vol;
                                dd[s0] += g * gx * gy * gz;
                                dd[s0 + 1] += g * fx * gy * gz;
                                dd[s0 + W] += g * gx * fy * gz;
                                dd[s0 + W + 1] += g * fx * fy * gz;
                                dd[s0 + HW] += g * gx * gy * fz;
                                dd[s0 + HW + 1] += g * fx * gy * fz;
                                dd[s0 + HW + W] += g * gx * fy * fz;
                                dd[s0 + HW + W + 1] += g * fx * fy * fz;
                            }
                            if (u->requires_grad) {
                                // derivative of the trilinear blend w.r.t. each coordinate
                                const T dxv = (d[s0 + 1] - d[s0]) * gy * gz +
                                              (d[s0 + W + 1] - d[s0 + W]) * fy * gz +
                                              (d[s0 + HW + 1] - d[s0 + HW]) * gy * fz +
                                              (d[s0 + HW + W + 1] - d[s0 + HW + W]) * fy * fz;
                                const T dyv = (d[s0 + W] - d[s0]) * gx * gz +
                                              (d[s0 + W + 1] - d[s0 + 1]) * fx * gz +
                                              (d[s0 + HW + W] - d[s0 + HW]) * gx * fz +
                                              (d[s0 + HW + W + 1] - d[s0 + HW + 1]) * fx * fz;
                                const T dzv = (d[s0 + HW] - d[s0]) * gx * gy +
                                              (d[s0 + HW + 1] - d[s0 + 1]) * fx * gy +
                                              (d[s0 + HW + W] - d[s0 + W]) * gx * fy +
                                              (d[s0 + HW + W + 1] - d[s0 + W + 1]) * fx * fy;
                                if (inx) du0 += g * dxv;
                                if (iny) du1 += g * dyv;
                                if (inz) du2 += g * dzv;
                            }
                        }
                        if (u->requires_grad) {
                            u->grad.v[idx] += du0;
                            u->grad.v[vol + idx] += du1;
                            u->grad.v[2 * vol + idx] += du2;
                        }
                    }
        });
    return out;
}

// ---------------------------------------------------------------------------
// spatial_gradient: {C,D,H,W} -> {3C,D,H,W}, output channel 3c+axis is
// d x_c / d axis (axis 0=x, 1=y, 2=z), central interior, one-sided faces.
// ---------------------------------------------------------------------------

template <typename T>
NodePtr<T> spatial_gradient(Tape<T>& tape, const NodePtr<T>& x) {
    if (!x->val.is_spatial()) throw DataError("spatial_gradient: input must be 4-D");
    const int C = x->val.channels(), D = x->val.nz(), H = x->val.ny(), W = x->val.nx();
    if (D < 3 || H < 3 || W < 3) throw DataError("spatial_gradient: dims must be >= 3");
    const std::int64_t vol = x->val.volume();
    auto out = make_leaf(Tensor<T>({3 * C, D, H, W}));

    const std::int64_t step[3] = {1, W, static_cast<std::int64_t>(H) * W};
    const int n_ax[3] = {W, H, D};

    parallel_for(static_cast<std::int64_t>(C) * D, 8, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const int c = static_cast<int>(p / D);
            const int k = static_cast<int>(p % D);
            const T* in_c = x->val.v.data() + c * vol;
            for (int ax = 0; ax < 3; ++ax) {
                T* out_c = out->val.v.data() + (static_cast<std::int64_t>(3 * c + ax)) * vol;
                const std::int64_t st = step[ax];
                for (int j = 0; j < H; ++j) {
                    const std::int64_t row = (static_cast<std::int64_t>(k) * H + j) * W;
                    for (int i = 0; i < W; ++i) {
                        const std::int64_t idx = row + i;
                        const int pos = ax == 0 ? i : (ax == 1 ? j : k);
                        const int n = n_ax[ax];
                        if (pos == 0)
                            out_c[idx] = in_c[idx + st] - in_c[idx];
                        else if (pos == n - 1)
                            out_c[idx] = in_c[idx] - in_c[idx - st];
                        else
                            out_c[idx] = T(0.5) * (in_c[idx + st] - in_c[idx - st]);
                    }
                }
            }
        }
    });

    if (tape.should_record({x}))
        tape.record(out, {x}, [out, x] {
            const int C = x->val.channels(), D = x->val.nz(), H = x->val.ny(), W = x->val.nx();
            const std::int64_t vol = x->val.volume();
            const std::int64_t step[3] = {1, W, static_cast<std::int64_t>(H) * W};
            const int n_ax[3] = {W, H, D};
            for (int c = 0; c < C; ++c) {
                T* dx_c = x->grad.v.data() + static_cast<std::int64_t>(c) * vol;
                for (int ax = 0; ax < 3; ++ax) {
                    const T* g_c =
                        out->grad.v.data() + (static_cast<std::int64_t>(3 * c + ax)) * vol;
                    const std::int64_t st = step[ax];
                    const int n = n_ax[ax];
                    for (int k = 0; k < D; ++k)
                        for (int j = 0; j < H; ++j)
                            for (int i = 0; i < W; ++i) {
                                const std::int64_t idx = (static_cast<std::int64_t>(k) * H + j) * W + i;
                                const int pos = ax == 0 ? i : (ax == 1 ? j : k);
                                const T g = g_c[idx];
                                if (g == T(0)) continue;
                                if (pos == 0) {
                                    dx_c[idx + st] += g;
                                    dx_c[idx] -= g;
                                } else if (pos == n - 1) {
                                    dx_c[idx] += g;
                                    dx_c[idx - st] -= g;
                                } else {
                                    dx_c[idx + st] += T(0.5) * g;
                                    dx_c[idx - st] -= T(0.5) * g;
                                }
                            }
                }
            }
        });
    return out;
}

}  // namespace svf::ad
