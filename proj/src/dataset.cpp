#include "svflow/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "svflow/field_ops.hpp"
#include "svflow/metrics.hpp"
#include "svflow/rng.hpp"
#include "svflow/version.hpp"
#include "svflow/volume_io.hpp"

namespace svf {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw DataError("unknown split name: " + name);
}

void DatasetParams::validate() const {
    spec.validate();
    if (count < 10) throw DataError("dataset count must be >= 10");
    const double sum = split[0] + split[1] + split[2];
    if (std::fabs(sum - 1.0) > 1e-9) throw DataError("split ratios must sum to 1");
    for (double s : split)
        if (s < 0.0) throw DataError("split ratios must be nonnegative");
}

void generate_dataset(const ScalarVolume& base, const DatasetParams& params,
                      const std::filesystem::path& out_dir) {
    params.validate();
    base.geometry.validate();
    require_finite(base, "generate_dataset base");

    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "samples");

    const int n = params.count;
    const int n_train = static_cast<int>(std::floor(params.split[0] * n));
    const int n_val = static_cast<int>(std::floor(params.split[1] * n));

    std::ostringstream cfg;
    cfg << "grid=" << params.spec.control_grid[0] << "," << params.spec.control_grid[1] << ","
        << params.spec.control_grid[2] << " order=" << params.spec.order
        << " scale=" << params.spec.scale << " count=" << n << " split=" << params.split[0] << "/"
        << params.split[1] << "/" << params.split[2];
    const std::uint64_t cfg_hash = fnv1a64(cfg.str().data(), cfg.str().size());

    std::ofstream manifest(out_dir / "manifest.tsv", std::ios::trunc);
    if (!manifest) throw DataError("cannot write manifest in " + out_dir.string());
    manifest << "# svflow " << kVersion << " in-silico dataset\n";
    manifest << "# seed=" << params.spec.seed << " config_hash=" << std::hex << cfg_hash
             << std::dec << "\n";
    manifest << "# " << cfg.str() << "\n";
    manifest << "id\tsplit\tf0\tf1\tphi\trejections\n";

    for (int i = 0; i < n; ++i) {
        VectorField phi_hat;
        int rejections = 0;
        for (;; ++rejections) {
            if (rejections > params.max_redraws)
                throw NumericalError("dataset generation: too many folded redraws; "
                                     "reduce the deformation scale");
            Rng rng = Rng::stream(params.spec.seed,
                                  static_cast<std::uint64_t>(i) * 4096ULL +
                                      static_cast<std::uint64_t>(rejections));
            phi_hat = generate_bspline_deformation(params.spec, base.geometry, rng);
            if (folding_count(phi_hat).second == 0) break;
        }

        char id[16];
        std::snprintf(id, sizeof(id), "s%04d", i);
        const ScalarVolume f0 = warp(base, phi_hat);

        const std::string f0_name = std::string(id) + "_f0.svol";
        const std::string f1_name = std::string(id) + "_f1.svol";
        const std::string phi_name = std::string(id) + "_phi.svol";
        write_svol(out_dir / "samples" / f0_name, f0);
        write_svol(out_dir / "samples" / f1_name, base);
        write_svol(out_dir / "samples" / phi_name, phi_hat);

        const Split split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
        manifest << id << "\t" << split_name(split) << "\tsamples/" << f0_name << "\tsamples/"
                 << f1_name << "\tsamples/" << phi_name << "\t" << rejections << "\n";
    }
    if (!manifest) throw DataError("manifest write failed in " + out_dir.string());
}

SampleStore::SampleStore(const std::filesystem::path& dir) : dir_(dir) {
    std::ifstream is(dir / "manifest.tsv");
    if (!is) throw DataError("cannot open manifest: " + (dir / "manifest.tsv").string());
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {  // column header
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        SampleEntry e;
        std::string split, f0, f1, phi, rejections;
        if (!std::getline(row, e.id, '\t') || !std::getline(row, split, '\t') ||
            !std::getline(row, f0, '\t') || !std::getline(row, f1, '\t') ||
            !std::getline(row, phi, '\t') || !std::getline(row, rejections))
            throw DataError("malformed manifest row: " + line);
        e.split = split_from_name(split);
        e.f0 = dir / f0;
        e.f1 = dir / f1;
        e.phi = dir / phi;
        e.rejections = std::stoi(rejections);
        entries_.push_back(std::move(e));
    }
    if (entries_.empty()) throw DataError("manifest has no samples: " + dir.string());
}

std::vector<int> SampleStore::indices(Split s) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].split == s) out.push_back(static_cast<int>(i));
    return out;
}

const LoadedSample& SampleStore::load(int index) {
    auto it = cache_.find(index);
    if (it != cache_.end()) return it->second;
    const SampleEntry& e = entries_.at(static_cast<std::size_t>(index));
    LoadedSample s;
    s.f0 = read_svol_scalar(e.f0);
    access_log_.push_back(e.f0.string());
    s.f1 = read_svol_scalar(e.f1);
    access_log_.push_back(e.f1.string());
    if (std::filesystem::exists(e.phi)) {
        s.phi_hat = read_svol_field(e.phi, FieldKind::displacement);
        access_log_.push_back(e.phi.string());
    }
    return cache_.emplace(index, std::move(s)).first->second;
}

}  // namespace svf
