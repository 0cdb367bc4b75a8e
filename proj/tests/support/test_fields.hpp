#pragma once

#include <cmath>

#include "svflow/grid.hpp"
#include "svflow/rng.hpp"

namespace svf::testsupport {

// Random smooth band-limited field: a few low-frequency sinusoid products per
// component, rescaled so max |v| == max_mag. `cycles` bounds the highest
// frequency (in periods across the volume); smaller = smoother. When
// `windowed`, a separable sine window makes the field vanish at the faces so
// flows stay inside the domain.
inline VectorField random_smooth_field(const GridGeometry& geom, double max_mag,
                                       std::uint64_t seed, double cycles = 1.5, int n_waves = 4,
                                       bool windowed = true) {
    Rng rng(seed);
    VectorField v(geom, FieldKind::velocity);
    const auto& d = geom.dims;
    constexpr double kPi = 3.14159265358979323846;
    for (int c = 0; c < 3; ++c) {
        for (int w = 0; w < n_waves; ++w) {
            const double amp = rng.uniform(0.3, 1.0);
            double freq[3], phase[3];
            for (int a = 0; a < 3; ++a) {
                freq[a] = rng.uniform(0.25, cycles) * 2.0 * kPi / (d[a] - 1);
                phase[a] = rng.uniform(0.0, 2.0 * kPi);
            }
            std::size_t idx = 0;
            for (int k = 0; k < d[2]; ++k)
                for (int j = 0; j < d[1]; ++j)
                    for (int i = 0; i < d[0]; ++i, ++idx)
                        v.comp[c][idx] += amp * std::sin(freq[0] * i + phase[0]) *
                                          std::sin(freq[1] * j + phase[1]) *
                                          std::sin(freq[2] * k + phase[2]);
        }
    }
    if (windowed) {
        std::size_t idx = 0;
        for (int k = 0; k < d[2]; ++k)
            for (int j = 0; j < d[1]; ++j)
                for (int i = 0; i < d[0]; ++i, ++idx) {
                    const double win = std::sin(kPi * i / (d[0] - 1)) *
                                       std::sin(kPi * j / (d[1] - 1)) *
                                       std::sin(kPi * k / (d[2] - 1));
                    for (int c = 0; c < 3; ++c) v.comp[c][idx] *= win;
                }
    }
    double m = max_abs(v);
    if (m <= 0.0) m = 1.0;
    for (int c = 0; c < 3; ++c)
        for (double& x : v.comp[c]) x *= max_mag / m;
    return v;
}

}  // namespace svf::testsupport
