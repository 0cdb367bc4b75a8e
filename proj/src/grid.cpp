#include "svflow/grid.hpp"

#include <cmath>

namespace svf {

void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const std::string& what) {
    if (a.dims != b.dims)
        throw DataError(what + ": geometry mismatch (" + std::to_string(a.dims[0]) + "x" +
                        std::to_string(a.dims[1]) + "x" + std::to_string(a.dims[2]) + " vs " +
                        std::to_string(b.dims[0]) + "x" + std::to_string(b.dims[1]) + "x" +
                        std::to_string(b.dims[2]) + ")");
}

void require_finite(const ScalarVolume& v, const std::string& what) {
    for (double x : v.data)
        if (!std::isfinite(x)) throw NumericalError(what + ": non-finite value");
}

void require_finite(const VectorField& v, const std::string& what) {
    for (const auto& c : v.comp)
        for (double x : c)
            if (!std::isfinite(x)) throw NumericalError(what + ": non-finite value");
}

double max_abs(const VectorField& v) {
    double m = 0.0;
    for (const auto& c : v.comp)
        for (double x : c) m = std::max(m, std::fabs(x));
    return m;
}

VectorField negated(const VectorField& v) {
    VectorField out(v.geometry, v.kind);
    for (int a = 0; a < 3; ++a)
        for (std::size_t i = 0; i < v.comp[a].size(); ++i) out.comp[a][i] = -v.comp[a][i];
    return out;
}

}  // namespace svf
