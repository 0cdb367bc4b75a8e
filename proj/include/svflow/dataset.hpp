#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svflow/bspline_gen.hpp"
#include "svflow/grid.hpp"

namespace svf {

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct DatasetParams {
    BsplineDeformationSpec spec;
    int count = 100;
    std::array<double, 3> split{0.8, 0.1, 0.1};
    int max_redraws = 200;  // per sample, before giving up

    void validate() const;
};

// For each sample i: phi_hat = B-spline field (redrawn while det J <= 0
// anywhere), f1 = base, f0 = warp(base, phi_hat). Files are SVOL; the
// manifest records id, split, file names and redraw counts. Byte-identical
// for identical (base, params).
void generate_dataset(const ScalarVolume& base, const DatasetParams& params,
                      const std::filesystem::path& out_dir);

struct SampleEntry {
    std::string id;
    Split split = Split::train;
    std::filesystem::path f0, f1, phi;
    int rejections = 0;
};

struct LoadedSample {
    ScalarVolume f0, f1;
    std::optional<VectorField> phi_hat;
};

// Manifest-backed sample access with an access log, so tests can audit which
// files a training run touched.
class SampleStore {
  public:
    explicit SampleStore(const std::filesystem::path& dir);

    const std::vector<SampleEntry>& entries() const { return entries_; }
    std::vector<int> indices(Split s) const;

    const LoadedSample& load(int index);

    const std::vector<std::string>& access_log() const { return access_log_; }
    void clear_access_log() { access_log_.clear(); }

    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
    std::vector<SampleEntry> entries_;
    std::map<int, LoadedSample> cache_;
    std::vector<std::string> access_log_;
};

}  // namespace svf
