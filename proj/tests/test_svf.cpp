#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/flow_oracle.hpp"
#include "support/test_fields.hpp"
#include "svflow/field_ops.hpp"
#include "svflow/svf_algebra.hpp"

using namespace svf;
using namespace svf::testsupport;

namespace {

GridGeometry geom(int n) { return GridGeometry{{n, n, n}, {1.0, 1.0, 1.0}}; }

double inf_diff(const VectorField& a, const VectorField& b) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < a.comp[c].size(); ++i)
            m = std::max(m, std::fabs(a.comp[c][i] - b.comp[c][i]));
    return m;
}

VectorField linear_field(const GridGeometry& g, const double A[3][3], double center) {
    VectorField v(g, FieldKind::velocity);
    std::size_t idx = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++idx)
                for (int c = 0; c < 3; ++c)
                    v.comp[c][idx] = A[c][0] * (i - center) + A[c][1] * (j - center) +
                                     A[c][2] * (k - center);
    return v;
}

}  // namespace

TEST_CASE("jacobian of a constant field vanishes") {
    VectorField u(geom(8), FieldKind::displacement);
    for (auto& x : u.comp[0]) x = 3.0;
    for (auto& x : u.comp[2]) x = -1.5;
    const JacobianField j = spatial_jacobian(u);
    for (const auto& e : j.entries)
        for (double x : e) CHECK(x == 0.0);
}

TEST_CASE("jacobian of a linear field is its matrix everywhere inside") {
    const double A[3][3] = {{0.1, -0.05, 0.02}, {0.03, 0.07, -0.01}, {0.0, 0.04, -0.06}};
    const VectorField u = linear_field(geom(8), A, 0.0);
    const JacobianField j = spatial_jacobian(u);
    std::size_t idx = 0;
    for (int k = 0; k < 8; ++k)
        for (int jj = 0; jj < 8; ++jj)
            for (int i = 0; i < 8; ++i, ++idx)
                if (i > 0 && i < 7 && jj > 0 && jj < 7 && k > 0 && k < 7)
                    for (int r = 0; r < 3; ++r)
                        for (int c = 0; c < 3; ++c)
                            CHECK(std::fabs(j.entries[3 * r + c][idx] - A[r][c]) < 1e-10);
}

TEST_CASE("jacobian matches an analytic-derivative oracle on a sin field") {
    const auto g = geom(16);
    VectorField u(g, FieldKind::displacement);
    const double f = 2.0 * 3.14159265358979 / 32.0;  // half a period across the volume
    std::size_t idx = 0;
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i, ++idx) {
                u.comp[0][idx] = std::sin(f * i) * std::cos(f * j);
                u.comp[1][idx] = std::cos(f * k) * std::sin(f * j);
                u.comp[2][idx] = std::sin(f * i + 0.5) * std::sin(f * k);
            }
    const JacobianField jac = spatial_jacobian(u);
    idx = 0;
    double max_rel = 0.0;
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i, ++idx) {
                if (i < 1 || i > 14 || j < 1 || j > 14 || k < 1 || k > 14) continue;
                const double truth[9] = {
                    f * std::cos(f * i) * std::cos(f * j), -f * std::sin(f * i) * std::sin(f * j), 0.0,
                    0.0, f * std::cos(f * k) * std::cos(f * j), -f * std::sin(f * k) * std::sin(f * j),
                    f * std::cos(f * i + 0.5) * std::sin(f * k), 0.0,
                    f * std::sin(f * i + 0.5) * std::cos(f * k)};
                for (int e = 0; e < 9; ++e)
                    max_rel = std::max(max_rel, std::fabs(jac.entries[e][idx] - truth[e]) / f);
            }
    CHECK(max_rel < 1e-2);
}

TEST_CASE("jacobian rejects tiny grids") {
    VectorField u(GridGeometry{{2, 4, 4}, {1, 1, 1}}, FieldKind::displacement);
    CHECK_THROWS_AS(spatial_jacobian(u), DataError);
}

TEST_CASE("lie bracket of a field with itself is zero") {
    const VectorField v = random_smooth_field(geom(8), 2.0, 5);
    const VectorField b = lie_bracket(v, v);
    for (int c = 0; c < 3; ++c)
        for (double x : b.comp[c]) CHECK(x == 0.0);
}

TEST_CASE("lie bracket of constant fields is zero") {
    VectorField v(geom(8), FieldKind::velocity), w(geom(8), FieldKind::velocity);
    for (auto& x : v.comp[0]) x = 1.0;
    for (auto& x : w.comp[1]) x = -2.0;
    const VectorField b = lie_bracket(v, w);
    for (int c = 0; c < 3; ++c)
        for (double x : b.comp[c]) CHECK(x == 0.0);
}

TEST_CASE("lie bracket of linear fields is the matrix commutator field") {
    const double A[3][3] = {{0.0, 0.2, 0.0}, {-0.2, 0.0, 0.1}, {0.0, 0.0, 0.05}};
    const double B[3][3] = {{0.1, 0.0, -0.1}, {0.0, -0.05, 0.0}, {0.2, 0.0, 0.0}};
    const auto g = geom(9);
    const VectorField v = linear_field(g, A, 4.0);
    const VectorField w = linear_field(g, B, 4.0);
    const VectorField got = lie_bracket(v, w);
    // with [v,w] = Jv w - Jw v and v=A(x-c), w=B(x-c): [v,w](x) = (AB-BA)(x-c)
    double C[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            C[r][c] = 0.0;
            for (int m = 0; m < 3; ++m) C[r][c] += A[r][m] * B[m][c] - B[r][m] * A[m][c];
        }
    const VectorField want = linear_field(g, C, 4.0);
    double scale = 0.0;
    for (int c = 0; c < 3; ++c)
        for (double x : want.comp[c]) scale = std::max(scale, std::fabs(x));
    std::size_t idx = 0;
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i, ++idx)
                if (i > 0 && i < 8 && j > 0 && j < 8 && k > 0 && k < 8)
                    for (int c = 0; c < 3; ++c)
                        CHECK(std::fabs(got.comp[c][idx] - want.comp[c][idx]) / scale < 1e-6);
}

TEST_CASE("lie bracket antisymmetry and bilinearity") {
    const auto g = geom(8);
    const VectorField v = random_smooth_field(g, 2.0, 21);
    const VectorField w = random_smooth_field(g, 2.0, 22);
    const VectorField vw = lie_bracket(v, w);
    const VectorField wv = lie_bracket(w, v);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < vw.comp[c].size(); ++i)
            CHECK(std::fabs(vw.comp[c][i] + wv.comp[c][i]) < 1e-12);

    VectorField av = v;
    const double a = 3.7;
    for (int c = 0; c < 3; ++c)
        for (auto& x : av.comp[c]) x *= a;
    const VectorField avw = lie_bracket(av, w);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < vw.comp[c].size(); ++i)
            CHECK(std::fabs(avw.comp[c][i] - a * vw.comp[c][i]) < 1e-10);
}

TEST_CASE("bchd with a zero argument is exact") {
    const VectorField v = random_smooth_field(geom(8), 2.0, 33);
    const VectorField zero(geom(8), FieldKind::velocity);
    const VectorField z = bchd_compose(v, zero);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < z.comp[c].size(); ++i) CHECK(z.comp[c][i] == v.comp[c][i]);
}

TEST_CASE("bchd of a field with itself is exactly 2v") {
    const VectorField v = random_smooth_field(geom(8), 2.0, 34);
    const VectorField z = bchd_compose(v, v);
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < z.comp[c].size(); ++i)
            CHECK(z.comp[c][i] == 2.0 * v.comp[c][i]);
}

TEST_CASE("order-1 bchd is plain summation, and constants commute at every order") {
    const auto g = geom(8);
    const VectorField v = random_smooth_field(g, 2.0, 35);
    const VectorField w = random_smooth_field(g, 2.0, 36);
    const VectorField z1 = bchd_compose(v, w, BchdConfig{1});
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < z1.comp[c].size(); ++i)
            CHECK(z1.comp[c][i] == v.comp[c][i] + w.comp[c][i]);

    VectorField cv(g, FieldKind::velocity), cw(g, FieldKind::velocity);
    for (auto& x : cv.comp[0]) x = 0.7;
    for (auto& x : cw.comp[2]) x = -1.2;
    for (int order = 1; order <= 4; ++order) {
        const VectorField z = bchd_compose(cv, cw, BchdConfig{order});
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < z.comp[c].size(); ++i)
                CHECK(z.comp[c][i] == cv.comp[c][i] + cw.comp[c][i]);
    }
}

TEST_CASE("bchd config validation") {
    CHECK_THROWS_AS(BchdConfig{0}.validate(), DataError);
    CHECK_THROWS_AS(BchdConfig{5}.validate(), DataError);
    const VectorField v(geom(8), FieldKind::velocity);
    const VectorField w(geom(4), FieldKind::velocity);
    CHECK_THROWS_AS(bchd_compose(v, w), DataError);
}

TEST_CASE("the bchd composition beats summation against exp(v) o exp(w)") {
    // the sign-convention lock: zeta_4 must bring exp(zeta(v,w)) closer to
    // exp(v) o exp(w) than plain summation does
    const auto g = geom(16);
    int wins = 0;
    const int n = 20;
    for (int t = 0; t < n; ++t) {
        const VectorField v = random_smooth_field(g, 1.0, 400 + t, 1.0);
        const VectorField w = random_smooth_field(g, 1.0, 500 + t, 1.0);
        const VectorField target = compose_deformations(exponentiate(v), exponentiate(w));
        VectorField sum(g, FieldKind::velocity);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < sum.comp[c].size(); ++i)
                sum.comp[c][i] = v.comp[c][i] + w.comp[c][i];
        const double err_sum = inf_diff(exponentiate(sum), target);
        const double err_bchd = inf_diff(exponentiate(bchd_compose(v, w)), target);
        if (err_bchd < err_sum) ++wins;
    }
    CHECK(wins == n);
}

TEST_CASE("small linear fields: bchd improves on summation") {
    const double A[3][3] = {{0.0, 1.0, 0.0}, {-1.0, 0.0, 0.5}, {0.0, -0.5, 0.0}};
    const double B[3][3] = {{0.0, 0.0, -1.0}, {0.0, 0.0, 0.0}, {1.0, 0.5, 0.0}};
    const double eps = 0.05;
    double Ae[3][3], Be[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            Ae[r][c] = eps * A[r][c];
            Be[r][c] = eps * B[r][c];
        }
    const auto g = geom(17);
    const VectorField v = linear_field(g, Ae, 8.0);
    const VectorField w = linear_field(g, Be, 8.0);
    const VectorField target = compose_deformations(exponentiate(v), exponentiate(w));
    const VectorField sum_exp = exponentiate(bchd_compose(v, w, BchdConfig{1}));
    const VectorField bchd_exp = exponentiate(bchd_compose(v, w));
    // compare well inside only (flows near the border leave the domain)
    double err_sum = 0.0, err_bchd = 0.0;
    std::size_t idx = 0;
    for (int k = 0; k < 17; ++k)
        for (int j = 0; j < 17; ++j)
            for (int i = 0; i < 17; ++i, ++idx) {
                if (i < 4 || i > 12 || j < 4 || j > 12 || k < 4 || k > 12) continue;
                for (int c = 0; c < 3; ++c) {
                    err_sum = std::max(err_sum, std::fabs(sum_exp.comp[c][idx] - target.comp[c][idx]));
                    err_bchd = std::max(err_bchd, std::fabs(bchd_exp.comp[c][idx] - target.comp[c][idx]));
                }
            }
    CHECK(err_bchd < err_sum);
}

TEST_CASE("exponential of the zero field is the identity exactly") {
    const VectorField zero(geom(8), FieldKind::velocity);
    const VectorField phi = exponentiate(zero);
    CHECK(phi.kind == FieldKind::displacement);
    for (int c = 0; c < 3; ++c)
        for (double x : phi.comp[c]) CHECK(x == 0.0);
}

TEST_CASE("exponential of a constant field is a translation") {
    VectorField v(geom(16), FieldKind::velocity);
    for (auto& x : v.comp[0]) x = 1.25;
    for (auto& x : v.comp[1]) x = -0.5;
    const VectorField phi = exponentiate(v);
    std::size_t idx = 0;
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i, ++idx)
                if (i >= 3 && i < 13 && j >= 3 && j < 13) {
                    CHECK(std::fabs(phi.comp[0][idx] - 1.25) < 1e-9);
                    CHECK(std::fabs(phi.comp[1][idx] + 0.5) < 1e-9);
                    CHECK(std::fabs(phi.comp[2][idx]) < 1e-9);
                }
}

TEST_CASE("exponential matches the RK4 flow oracle") {
    const auto g = geom(32);
    const int margin = 8;
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
        const VectorField v = random_smooth_field(g, 5.0, 300 + t, 0.25, 2, false);
        const VectorField phi = exponentiate(v);
        for (int k = margin; k < 32 - margin; ++k)
            for (int j = margin; j < 32 - margin; ++j)
                for (int i = margin; i < 32 - margin; ++i) {
                    const auto end = rk4_endpoint(v, {double(i), double(j), double(k)}, 64);
                    const std::size_t idx = g.index(i, j, k);
                    const double dx = i + phi.comp[0][idx] - end[0];
                    const double dy = j + phi.comp[1][idx] - end[1];
                    const double dz = k + phi.comp[2][idx] - end[2];
                    worst = std::max(worst, std::sqrt(dx * dx + dy * dy + dz * dz));
                }
    }
    CHECK(worst < 0.01);
}

TEST_CASE("exp(v) o exp(-v) is near the identity") {
    const auto g = geom(32);
    const int margin = 6;
    for (int t = 0; t < 3; ++t) {
        const VectorField v = random_smooth_field(g, 3.0, 700 + t, 0.3, 2, false);
        const VectorField res = compose_deformations(exponentiate(v), exponentiate_inverse(v));
        double worst = 0.0;
        for (int k = margin; k < 32 - margin; ++k)
            for (int j = margin; j < 32 - margin; ++j)
                for (int i = margin; i < 32 - margin; ++i) {
                    const std::size_t idx = g.index(i, j, k);
                    for (int c = 0; c < 3; ++c)
                        worst = std::max(worst, std::fabs(res.comp[c][idx]));
                }
        CHECK(worst < 0.05);
    }
}

TEST_CASE("doubling the squaring steps barely changes the result") {
    const auto g = geom(32);
    for (int t = 0; t < 3; ++t) {
        const VectorField v = random_smooth_field(g, 2.0, 800 + t, 0.3, 2, false);
        CHECK(inf_diff(exponentiate(v, 8), exponentiate(v, 16)) < 1e-3);
    }
}

TEST_CASE("adaptive step selection follows the 1/16-voxel rule") {
    VectorField v(geom(8), FieldKind::velocity);
    CHECK(adaptive_squaring_steps(v) == 4);  // zero field, clamped from below
    for (auto& x : v.comp[0]) x = 5.0;
    CHECK(adaptive_squaring_steps(v) == 7);  // 5/128 <= 1/16 < 5/64
    for (auto& x : v.comp[0]) x = 1000.0;
    CHECK(adaptive_squaring_steps(v) == 10);  // clamped from above
}

TEST_CASE("exponentiate rejects non-finite fields") {
    VectorField v(geom(8), FieldKind::velocity);
    v.comp[1][3] = std::nan("");
    CHECK_THROWS_AS(exponentiate(v), NumericalError);
}
