#pragma once

#include <filesystem>

#include "svflow/grid.hpp"

namespace svf {

// Subset NIfTI-1 reader: single-file .nii, little-endian, datatype float32 or
// int16, <= 3 spatial dims, shear-free affine. Read-only; all artifact output
// stays in SVOL.
struct NiftiVolume {
    ScalarVolume volume;  // raw values with scl_slope/scl_inter applied
    double raw_min = 0.0;
    double raw_max = 0.0;
    int datatype = 0;
};

NiftiVolume read_nifti(const std::filesystem::path& path);

// Min-max normalization to [0,1] used at CLI ingestion; returns the recorded
// (offset, scale) with value = (raw - offset) / scale.
std::pair<double, double> normalize_intensities(ScalarVolume& vol);

}  // namespace svf
