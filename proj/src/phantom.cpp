#include "svflow/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "svflow/rng.hpp"

namespace svf {

ScalarVolume make_phantom(const GridGeometry& geometry, std::uint64_t seed) {
    geometry.validate();
    Rng rng(seed);
    const auto& d = geometry.dims;
    const double ext[3] = {static_cast<double>(d[0] - 1), static_cast<double>(d[1] - 1),
                           static_cast<double>(d[2] - 1)};

    struct Blob {
        double c[3], sigma, amp;
    };
    std::vector<Blob> blobs(7);
    for (auto& b : blobs) {
        for (int a = 0; a < 3; ++a) b.c[a] = rng.uniform(0.15, 0.85) * ext[a];
        b.sigma = rng.uniform(0.08, 0.22) * ext[0];
        b.amp = rng.uniform(0.4, 1.0);
    }
    struct Sheet {
        double n[3], offset, sigma, amp, wobble, freq;
    };
    std::vector<Sheet> sheets(2);
    for (auto& s : sheets) {
        double norm = 0.0;
        for (int a = 0; a < 3; ++a) {
            s.n[a] = rng.normal();
            norm += s.n[a] * s.n[a];
        }
        norm = std::sqrt(norm);
        for (int a = 0; a < 3; ++a) s.n[a] /= norm;
        s.offset = rng.uniform(0.3, 0.7);
        s.sigma = rng.uniform(0.02, 0.05) * ext[0];
        s.amp = rng.uniform(0.5, 0.9);
        s.wobble = rng.uniform(0.03, 0.08) * ext[0];
        s.freq = rng.uniform(1.0, 2.0);
    }
    const double tex_phase[3] = {rng.uniform(0.0, 6.28), rng.uniform(0.0, 6.28),
                                 rng.uniform(0.0, 6.28)};

    ScalarVolume vol(geometry);
    std::size_t idx = 0;
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i, ++idx) {
                const double p[3] = {static_cast<double>(i), static_cast<double>(j),
                                     static_cast<double>(k)};
                double v = 0.0;
                for (const auto& b : blobs) {
                    double r2 = 0.0;
                    for (int a = 0; a < 3; ++a) r2 += (p[a] - b.c[a]) * (p[a] - b.c[a]);
                    v += b.amp * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
                }
                for (const auto& s : sheets) {
                    double dist = -s.offset * ext[0];
                    for (int a = 0; a < 3; ++a) dist += s.n[a] * p[a];
                    dist += s.wobble * std::sin(s.freq * 6.2831853 * p[(0) % 3] / ext[0]) *
                            std::cos(s.freq * 6.2831853 * p[1] / ext[1]);
                    v += s.amp * std::exp(-0.5 * dist * dist / (s.sigma * s.sigma));
                }
                // low-frequency texture so gradients exist everywhere
                v += 0.15 * std::sin(2.5 * 6.2831853 * p[0] / ext[0] + tex_phase[0]) *
                     std::sin(2.0 * 6.2831853 * p[1] / ext[1] + tex_phase[1]) *
                     std::sin(1.5 * 6.2831853 * p[2] / ext[2] + tex_phase[2]);
                vol.data[idx] = v;
            }

    const auto [mn, mx] = std::minmax_element(vol.data.begin(), vol.data.end());
    const double lo = *mn, hi = *mx;
    const double range = hi > lo ? hi - lo : 1.0;
    for (double& x : vol.data) x = (x - lo) / range;
    return vol;
}

}  // namespace svf
