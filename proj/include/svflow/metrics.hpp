#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "svflow/grid.hpp"
#include "svflow/svf_algebra.hpp"

namespace svf {

// flags(x) = 1 where det J_phi(x) <= 0
struct FoldingMap {
    GridGeometry geometry;
    std::vector<std::uint8_t> flags;
};

// det(I + du/dx) per voxel, same difference stencil as spatial_jacobian.
ScalarVolume jacobian_determinant(const VectorField& phi);

// Returns the folding map and eps_reg, the total number of folded voxels.
// Boundary voxels (one-sided stencils) are included in the count.
std::pair<FoldingMap, long long> folding_count(const VectorField& phi);

// Global zero-mean normalized cross correlation. Errors when either volume
// is constant (undefined correlation).
double ncc(const ScalarVolume& f0, const ScalarVolume& f1);

// eps_flow: mean-per-voxel sum of squared component differences (voxel^2).
double flow_sse(const VectorField& phi, const VectorField& phi_hat);

struct DisplacementStats {
    double mean_jacobian = 0.0;
    double sd_jacobian = 0.0;
    double mean_displacement_mm = 0.0;
    double sd_displacement_mm = 0.0;
};

// Dataset-level mean +- sd of the per-field mean det J and mean |u|_2 in mm.
DisplacementStats displacement_stats(std::span<const VectorField> phis,
                                     const std::array<double, 3>& spacing_mm);

struct CaseMetrics {
    std::string case_id;
    std::optional<long long> eps_reg;
    std::optional<double> eps_img;
    std::optional<double> eps_flow;
    std::optional<double> mean_jac;
    std::optional<double> mean_disp_mm;
};

// CSV report, one row per case. The header records the metric definitions,
// the code version, and the provenance line passed by the caller.
void write_metrics_csv(std::ostream& os, std::span<const CaseMetrics> rows,
                       const std::string& provenance);

double median(std::vector<double> values);
double mean_of(std::span<const double> values);
double sd_of(std::span<const double> values);

}  // namespace svf
