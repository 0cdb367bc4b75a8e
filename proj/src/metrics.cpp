#include "svflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "svflow/version.hpp"

namespace svf {

ScalarVolume jacobian_determinant(const VectorField& phi) {
    const JacobianField jac = spatial_jacobian(phi);
    const GridGeometry& g = phi.geometry;
    ScalarVolume det(g);
    const std::size_t n = g.voxel_count();
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double a = 1.0 + jac.entries[0][idx], b = jac.entries[1][idx],
                     c = jac.entries[2][idx];
        const double d = jac.entries[3][idx], e = 1.0 + jac.entries[4][idx],
                     f = jac.entries[5][idx];
        const double gg = jac.entries[6][idx], h = jac.entries[7][idx],
                     i = 1.0 + jac.entries[8][idx];
        det.data[idx] = a * (e * i - f * h) - b * (d * i - f * gg) + c * (d * h - e * gg);
    }
    return det;
}

std::pair<FoldingMap, long long> folding_count(const VectorField& phi) {
    const ScalarVolume det = jacobian_determinant(phi);
    FoldingMap map;
    map.geometry = phi.geometry;
    map.flags.assign(det.data.size(), 0);
    long long count = 0;
    for (std::size_t i = 0; i < det.data.size(); ++i) {
        if (det.data[i] <= 0.0) {
            map.flags[i] = 1;
            ++count;
        }
    }
    return {std::move(map), count};
}

double ncc(const ScalarVolume& f0, const ScalarVolume& f1) {
    require_same_geometry(f0.geometry, f1.geometry, "ncc");
    const std::size_t n = f0.data.size();
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m0 += f0.data[i];
        m1 += f1.data[i];
    }
    m0 /= static_cast<double>(n);
    m1 /= static_cast<double>(n);
    double s01 = 0.0, s00 = 0.0, s11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = f0.data[i] - m0;
        const double b = f1.data[i] - m1;
        s01 += a * b;
        s00 += a * a;
        s11 += b * b;
    }
    if (s00 <= 0.0 || s11 <= 0.0)
        throw NumericalError("ncc: undefined for constant volumes");
    return s01 / std::sqrt(s00 * s11);
}

double flow_sse(const VectorField& phi, const VectorField& phi_hat) {
    require_same_geometry(phi.geometry, phi_hat.geometry, "flow_sse");
    const std::size_t n = phi.geometry.voxel_count();
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = phi.comp[c][i] - phi_hat.comp[c][i];
            acc += d * d;
        }
    return acc / static_cast<double>(n);
}

DisplacementStats displacement_stats(std::span<const VectorField> phis,
                                     const std::array<double, 3>& spacing_mm) {
    if (phis.empty()) throw DataError("displacement_stats: empty field list");
    std::vector<double> jac_means, disp_means;
    jac_means.reserve(phis.size());
    disp_means.reserve(phis.size());
    for (const auto& phi : phis) {
        const ScalarVolume det = jacobian_determinant(phi);
        double jm = 0.0;
        for (double d : det.data) jm += d;
        jac_means.push_back(jm / static_cast<double>(det.data.size()));
        const std::size_t n = phi.geometry.voxel_count();
        double dm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ux = phi.comp[0][i] * spacing_mm[0];
            const double uy = phi.comp[1][i] * spacing_mm[1];
            const double uz = phi.comp[2][i] * spacing_mm[2];
            dm += std::sqrt(ux * ux + uy * uy + uz * uz);
        }
        disp_means.push_back(dm / static_cast<double>(n));
    }
    DisplacementStats out;
    out.mean_jacobian = mean_of(jac_means);
    out.sd_jacobian = sd_of(jac_means);
    out.mean_displacement_mm = mean_of(disp_means);
    out.sd_displacement_mm = sd_of(disp_means);
    return out;
}

void write_metrics_csv(std::ostream& os, std::span<const CaseMetrics> rows,
                       const std::string& provenance) {
    os << "# svflow " << kVersion << " metrics report\n";
    if (!provenance.empty()) os << "# " << provenance << "\n";
    os << "# eps_reg: voxels with det(J_phi) <= 0; eps_img: global zero-mean NCC; "
          "eps_flow: per-voxel mean squared flow difference (voxel^2); "
          "mean_jac: mean det(J_phi); mean_disp_mm: mean |u| in mm\n";
    os << "case_id,eps_reg,eps_img,eps_flow,mean_jac,mean_disp_mm\n";
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.case_id << ",";
        if (r.eps_reg) os << *r.eps_reg;
        os << ",";
        if (r.eps_img) os << *r.eps_img;
        os << ",";
        if (r.eps_flow) os << *r.eps_flow;
        os << ",";
        if (r.mean_jac) os << *r.mean_jac;
        os << ",";
        if (r.mean_disp_mm) os << *r.mean_disp_mm;
        os << "\n";
    }
}

double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(std::span<const double> values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

double sd_of(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace svf
