#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "svflow/errors.hpp"

namespace svf {

// Regular 3-D grid. dims = (nx, ny, nz), spacing in mm per voxel.
// Memory order of everything living on a grid is x-fastest.
struct GridGeometry {
    std::array<int, 3> dims{2, 2, 2};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }

    bool operator==(const GridGeometry& o) const { return dims == o.dims && spacing == o.spacing; }
    bool operator!=(const GridGeometry& o) const { return !(*this == o); }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 2) throw DataError("grid dims must be >= 2 per axis");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
                throw DataError("grid spacing must be positive and finite");
        }
    }
};

// Single-component image on a grid.
struct ScalarVolume {
    GridGeometry geometry;
    std::vector<double> data;

    ScalarVolume() = default;
    explicit ScalarVolume(const GridGeometry& g, double fill = 0.0)
        : geometry(g), data(g.voxel_count(), fill) {}

    double& at(int i, int j, int k) { return data[geometry.index(i, j, k)]; }
    double at(int i, int j, int k) const { return data[geometry.index(i, j, k)]; }
};

enum class FieldKind { velocity, displacement };

// 3-component field on a grid, components in voxel units.
// A deformation phi is stored as its displacement u with phi(x) = x + u(x).
struct VectorField {
    GridGeometry geometry;
    FieldKind kind = FieldKind::displacement;
    std::array<std::vector<double>, 3> comp;

    VectorField() = default;
    VectorField(const GridGeometry& g, FieldKind kind_, double fill = 0.0) : geometry(g), kind(kind_) {
        for (auto& c : comp) c.assign(g.voxel_count(), fill);
    }

    double& at(int axis, int i, int j, int k) { return comp[axis][geometry.index(i, j, k)]; }
    double at(int axis, int i, int j, int k) const { return comp[axis][geometry.index(i, j, k)]; }
};

void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const std::string& what);
void require_finite(const ScalarVolume& v, const std::string& what);
void require_finite(const VectorField& v, const std::string& what);

double max_abs(const VectorField& v);

VectorField negated(const VectorField& v);

}  // namespace svf
