#include "svflow/nifti_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace svf {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t offset,
                       const std::string& what) {
    throw DataError("NIfTI read error in " + path.string() + " at byte offset " +
                    std::to_string(offset) + ": " + what);
}

template <typename T>
T get(const std::vector<char>& hdr, std::size_t offset) {
    T out;
    std::memcpy(&out, hdr.data() + offset, sizeof(T));
    return out;
}

}  // namespace

NiftiVolume read_nifti(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path.string());

    std::vector<char> hdr(348);
    if (!is.read(hdr.data(), 348)) fail(path, 0, "truncated header (need 348 bytes)");

    const auto sizeof_hdr = get<std::int32_t>(hdr, 0);
    if (sizeof_hdr != 348) {
        if (sizeof_hdr == 1543569408)  // 348 byte-swapped
            fail(path, 0, "big-endian NIfTI is not supported by this reader");
        fail(path, 0, "sizeof_hdr must be 348, got " + std::to_string(sizeof_hdr));
    }
    if (std::memcmp(hdr.data() + 344, "n+1\0", 4) != 0)
        fail(path, 344, "magic must be 'n+1' (single-file NIfTI-1)");

    std::int16_t dim[8];
    std::memcpy(dim, hdr.data() + 40, sizeof(dim));
    if (dim[0] < 1 || dim[0] > 7) fail(path, 40, "invalid dim[0]");
    for (int a = dim[0]; a >= 4; --a)
        if (dim[a] > 1) fail(path, 40, "more than 3 non-singleton dims are not supported");
    const int nx = dim[1], ny = std::max<int>(dim[2], 1), nz = std::max<int>(dim[3], 1);
    if (nx < 2 || ny < 2 || nz < 2) fail(path, 40, "need at least 2 voxels per axis");

    const auto datatype = get<std::int16_t>(hdr, 70);
    if (datatype != 4 && datatype != 16)
        fail(path, 70, "datatype must be int16 (4) or float32 (16), got " +
                           std::to_string(datatype));

    float pixdim[8];
    std::memcpy(pixdim, hdr.data() + 76, sizeof(pixdim));
    const auto vox_offset = get<float>(hdr, 108);
    if (vox_offset < 348.0f) fail(path, 108, "vox_offset below header size");
    const auto scl_slope = get<float>(hdr, 112);
    const auto scl_inter = get<float>(hdr, 116);

    // reject sheared affines: sform rows must be pairwise orthogonal
    const auto sform_code = get<std::int16_t>(hdr, 254);
    if (sform_code > 0) {
        float srow[3][4];
        std::memcpy(srow, hdr.data() + 280, sizeof(srow));
        for (int r = 0; r < 3; ++r)
            for (int s = r + 1; s < 3; ++s) {
                double dot = 0.0, na = 0.0, nb = 0.0;
                for (int c = 0; c < 3; ++c) {
                    dot += static_cast<double>(srow[r][c]) * srow[s][c];
                    na += static_cast<double>(srow[r][c]) * srow[r][c];
                    nb += static_cast<double>(srow[s][c]) * srow[s][c];
                }
                if (na > 0 && nb > 0 && std::fabs(dot) / std::sqrt(na * nb) > 1e-3)
                    fail(path, 280, "sheared affine is not supported");
            }
    }

    NiftiVolume out;
    out.datatype = datatype;
    GridGeometry g;
    g.dims = {nx, ny, nz};
    for (int a = 0; a < 3; ++a) {
        const double sp = pixdim[a + 1];
        g.spacing[a] = (std::isfinite(sp) && sp > 0) ? sp : 1.0;
    }
    g.validate();
    out.volume = ScalarVolume(g);

    is.seekg(static_cast<std::streamoff>(vox_offset));
    const std::size_t n = g.voxel_count();
    const double slope = (scl_slope != 0.0f && std::isfinite(scl_slope)) ? scl_slope : 1.0;
    const double inter = std::isfinite(scl_inter) ? scl_inter : 0.0;
    if (datatype == 16) {
        std::vector<float> buf(n);
        if (!is.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(n * sizeof(float))))
            fail(path, static_cast<std::size_t>(vox_offset), "truncated float32 payload");
        for (std::size_t i = 0; i < n; ++i) out.volume.data[i] = slope * buf[i] + inter;
    } else {
        std::vector<std::int16_t> buf(n);
        if (!is.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(n * sizeof(std::int16_t))))
            fail(path, static_cast<std::size_t>(vox_offset), "truncated int16 payload");
        for (std::size_t i = 0; i < n; ++i) out.volume.data[i] = slope * buf[i] + inter;
    }
    const auto [mn, mx] = std::minmax_element(out.volume.data.begin(), out.volume.data.end());
    out.raw_min = *mn;
    out.raw_max = *mx;
    return out;
}

std::pair<double, double> normalize_intensities(ScalarVolume& vol) {
    const auto [mn, mx] = std::minmax_element(vol.data.begin(), vol.data.end());
    const double lo = *mn, hi = *mx;
    const double scale = hi > lo ? hi - lo : 1.0;
    for (double& x : vol.data) x = (x - lo) / scale;
    return {lo, scale};
}

}  // namespace svf
