#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support/test_fields.hpp"
#include "svflow/field_ops.hpp"
#include "svflow/metrics.hpp"

using namespace svf;
using namespace svf::testsupport;

namespace {

GridGeometry geom(int n) { return GridGeometry{{n, n, n}, {1.0, 1.0, 1.0}}; }

// cofactor-expansion determinant on the same difference stencil
double det_oracle(const VectorField& phi, int i, int j, int k) {
    const auto& g = phi.geometry;
    double m[3][3];
    for (int r = 0; r < 3; ++r)
        for (int ax = 0; ax < 3; ++ax) {
            int a[3] = {i, j, k}, b[3] = {i, j, k};
            double denom;
            if (a[ax] == 0) {
                a[ax] = 1;
                denom = 1.0;
            } else if (a[ax] == g.dims[ax] - 1) {
                b[ax] = g.dims[ax] - 2;
                denom = 1.0;
            } else {
                a[ax] += 1;
                b[ax] -= 1;
                denom = 2.0;
            }
            m[r][ax] = (phi.comp[r][g.index(a[0], a[1], a[2])] -
                        phi.comp[r][g.index(b[0], b[1], b[2])]) /
                       denom;
            if (r == ax) m[r][ax] += 1.0;
        }
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace

TEST_CASE("jacobian determinant of the identity is one") {
    const VectorField id(geom(8), FieldKind::displacement);
    const ScalarVolume det = jacobian_determinant(id);
    for (double d : det.data) CHECK(d == doctest::Approx(1.0));
}

TEST_CASE("jacobian determinant of uniform scaling is s^3") {
    const double s = 1.15;
    VectorField u(geom(9), FieldKind::displacement);
    std::size_t idx = 0;
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i, ++idx) {
                u.comp[0][idx] = (s - 1.0) * i;
                u.comp[1][idx] = (s - 1.0) * j;
                u.comp[2][idx] = (s - 1.0) * k;
            }
    const ScalarVolume det = jacobian_determinant(u);
    idx = 0;
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i, ++idx)
                if (i > 0 && i < 8 && j > 0 && j < 8 && k > 0 && k < 8)
                    CHECK(std::fabs(det.data[idx] - s * s * s) / (s * s * s) < 1e-8);
}

TEST_CASE("jacobian determinant matches the cofactor oracle") {
    const VectorField phi = random_smooth_field(geom(12), 2.0, 77);
    const ScalarVolume det = jacobian_determinant(phi);
    for (int k = 0; k < 12; ++k)
        for (int j = 0; j < 12; ++j)
            for (int i = 0; i < 12; ++i)
                CHECK(std::fabs(det.at(i, j, k) - det_oracle(phi, i, j, k)) < 1e-12);
}

TEST_CASE("translation invariance of the jacobian determinant") {
    const auto g = geom(12);
    const VectorField phi = random_smooth_field(g, 2.0, 78);
    VectorField trans(g, FieldKind::displacement);
    for (auto& x : trans.comp[0]) x = 0.6;
    for (auto& x : trans.comp[2]) x = -0.4;
    // translation o phi adds a constant to the displacement
    const VectorField composed = compose_deformations(trans, phi);
    const ScalarVolume a = jacobian_determinant(composed);
    const ScalarVolume b = jacobian_determinant(phi);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        CHECK(std::fabs(a.data[i] - b.data[i]) < 1e-8);
}

TEST_CASE("folding count of the identity is zero") {
    const auto [map, count] = folding_count(VectorField(geom(8), FieldKind::displacement));
    CHECK(count == 0);
    for (auto f : map.flags) CHECK(f == 0);
}

TEST_CASE("an axis reflection folds every voxel") {
    VectorField u(geom(8), FieldKind::displacement);
    std::size_t idx = 0;
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i, ++idx) u.comp[0][idx] = -2.0 * i;
    const auto [map, count] = folding_count(u);
    CHECK(count == static_cast<long long>(u.geometry.voxel_count()));
    CHECK(map.flags.size() == u.geometry.voxel_count());
}

TEST_CASE("ncc of a volume with itself and its negation") {
    Rng rng(9);
    ScalarVolume f(geom(8));
    for (auto& v : f.data) v = rng.uniform(0.0, 1.0);
    CHECK(ncc(f, f) == doctest::Approx(1.0).epsilon(1e-9));
    ScalarVolume neg = f;
    for (auto& v : neg.data) v = -v;
    CHECK(ncc(f, neg) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("ncc is invariant to positive affine rescaling and is symmetric") {
    Rng rng(10);
    ScalarVolume f(geom(8)), g(geom(8));
    for (auto& v : f.data) v = rng.uniform(0.0, 1.0);
    for (auto& v : g.data) v = rng.uniform(0.0, 1.0);
    ScalarVolume scaled = f;
    for (auto& v : scaled.data) v = 2.5 * v + 0.75;
    CHECK(ncc(f, scaled) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::fabs(ncc(f, g) - ncc(g, f)) < 1e-12);
}

TEST_CASE("ncc rejects constant volumes") {
    ScalarVolume f(geom(8), 1.0);
    ScalarVolume g(geom(8));
    Rng rng(11);
    for (auto& v : g.data) v = rng.uniform(0.0, 1.0);
    CHECK_THROWS_AS(ncc(f, g), NumericalError);
    CHECK_THROWS_AS(ncc(f, f), NumericalError);
}

TEST_CASE("flow_sse definition and symmetry") {
    const auto g = geom(8);
    VectorField a(g, FieldKind::displacement), b(g, FieldKind::displacement);
    CHECK(flow_sse(a, b) == 0.0);
    b.comp[1][37] = 1.0;  // single-voxel unit offset
    CHECK(flow_sse(a, b) == doctest::Approx(1.0 / g.voxel_count()));
    const VectorField r1 = random_smooth_field(g, 2.0, 55);
    const VectorField r2 = random_smooth_field(g, 2.0, 56);
    CHECK(flow_sse(r1, r2) == doctest::Approx(flow_sse(r2, r1)).epsilon(1e-14));
    CHECK(flow_sse(r1, r1) == 0.0);
}

TEST_CASE("displacement statistics on identity and constant translation") {
    const auto g = geom(8);
    const VectorField id(g, FieldKind::displacement);
    const DisplacementStats s0 = displacement_stats(std::span(&id, 1), {1, 1, 1});
    CHECK(s0.mean_jacobian == doctest::Approx(1.0));
    CHECK(s0.sd_jacobian == 0.0);
    CHECK(s0.mean_displacement_mm == 0.0);

    VectorField t(g, FieldKind::displacement);
    for (auto& x : t.comp[0]) x = 3.0;
    const DisplacementStats s1 = displacement_stats(std::span(&t, 1), {1, 1, 1});
    CHECK(s1.mean_displacement_mm == doctest::Approx(3.0));
    CHECK(s1.mean_jacobian == doctest::Approx(1.0));

    CHECK_THROWS_AS(displacement_stats({}, {1, 1, 1}), DataError);
}

TEST_CASE("folding-free property of exponentials (cross-module)") {
    for (int t = 0; t < 10; ++t) {
        const VectorField v = random_smooth_field(geom(32), 5.0, 900 + t, 0.8);
        CHECK(folding_count(exponentiate(v)).second == 0);
    }
}

TEST_CASE("metrics CSV schema") {
    CaseMetrics full;
    full.case_id = "s0001";
    full.eps_reg = 0;
    full.eps_img = 0.97;
    full.eps_flow = 0.021;
    full.mean_jac = 0.95;
    full.mean_disp_mm = 9.56;
    CaseMetrics sparse;
    sparse.case_id = "s0002";
    sparse.eps_reg = 3;
    std::ostringstream os;
    write_metrics_csv(os, std::vector<CaseMetrics>{full, sparse}, "test provenance");
    const std::string text = os.str();
    CHECK(text.find("case_id,eps_reg,eps_img,eps_flow,mean_jac,mean_disp_mm") != std::string::npos);
    CHECK(text.find("s0001,0,0.97,0.021,0.95,9.56") != std::string::npos);
    CHECK(text.find("s0002,3,,,,") != std::string::npos);
    CHECK(text.find("test provenance") != std::string::npos);
}

TEST_CASE("median, mean and sd helpers") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    CHECK(mean_of(xs) == doctest::Approx(2.5));
    CHECK(sd_of(xs) == doctest::Approx(std::sqrt(5.0 / 3.0)));
}
