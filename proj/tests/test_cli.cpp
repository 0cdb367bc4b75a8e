#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "svflow/cli.hpp"
#include "svflow/field_ops.hpp"
#include "svflow/metrics.hpp"
#include "svflow/nets.hpp"
#include "svflow/phantom.hpp"
#include "svflow/volume_io.hpp"

using namespace svf;
namespace fs = std::filesystem;

namespace {

int run(std::initializer_list<const char*> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
    std::vector<const char*> argv{"svflow"};
    argv.insert(argv.end(), args);
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

fs::path write_zero_checkpoint(const fs::path& p, int levels, int base) {
    NetConfig cfg = model_preset("svf-bchd", levels, base);
    RegistrationModel<float> model(cfg, 7);
    TrainConfig tc;
    write_checkpoint(p, model.to_checkpoint(tc));
    return p;
}

}  // namespace

TEST_CASE("usage errors exit 1, data errors exit 2") {
    std::string err;
    CHECK(run({"no-such-command"}, nullptr, &err) == 1);
    CHECK(run({"register", "--bogus-flag"}, nullptr, &err) == 1);
    CHECK(run({"evaluate", "--flow", "/nonexistent/file.svol"}, nullptr, &err) == 2);
    CHECK(err.find("data error") != std::string::npos);
    std::string out;
    CHECK(run({"--help"}, &out) == 0);
    CHECK(out.find("gen-insilico") != std::string::npos);
}

TEST_CASE("gen-insilico writes a deterministic dataset") {
    const fs::path d1 = fs::temp_directory_path() / "svflow_cli_ds1";
    const fs::path d2 = fs::temp_directory_path() / "svflow_cli_ds2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    std::string out;
    CHECK(run({"gen-insilico", "--out", d1.c_str(), "--count", "10", "--size", "16,16,16",
               "--seed", "5"},
              &out) == 0);
    CHECK(out.find("8 train / 1 val / 1 test") != std::string::npos);
    CHECK(run({"gen-insilico", "--out", d2.c_str(), "--count", "10", "--size", "16,16,16",
               "--seed", "5"}) == 0);
    CHECK(file_bytes(d1 / "manifest.tsv") == file_bytes(d2 / "manifest.tsv"));
    CHECK(file_bytes(d1 / "samples" / "s0000_phi.svol") ==
          file_bytes(d2 / "samples" / "s0000_phi.svol"));
}

TEST_CASE("register with a zero-flow checkpoint reproduces the moving volume bitwise") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_reg";
    fs::create_directories(dir);
    const GridGeometry g{{16, 16, 16}, {1, 1, 1}};
    write_svol(dir / "vol.svol", make_phantom(g));
    write_zero_checkpoint(dir / "zero.svck", 2, 2);

    std::string out;
    const int code = run({"register", "--checkpoint", (dir / "zero.svck").c_str(),
                          "--fixed", (dir / "vol.svol").c_str(),
                          "--moving", (dir / "vol.svol").c_str(),
                          "--out-warped", (dir / "warped.svol").c_str(),
                          "--out-flow", (dir / "flow.svol").c_str(),
                          "--out-svf", (dir / "svf.svol").c_str()},
                         &out);
    CHECK(code == 0);
    CHECK(file_bytes(dir / "warped.svol") == file_bytes(dir / "vol.svol"));
    CHECK(out.find("eps_reg=0 eps_img=1.000000") != std::string::npos);
    const VectorField flow = read_svol_field(dir / "flow.svol");
    for (int c = 0; c < 3; ++c)
        for (double v : flow.comp[c]) CHECK(v == 0.0);
}

TEST_CASE("register rejects mismatched inputs with exit 2") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_reg2";
    fs::create_directories(dir);
    write_svol(dir / "a.svol", make_phantom(GridGeometry{{16, 16, 16}, {1, 1, 1}}));
    write_svol(dir / "b.svol", make_phantom(GridGeometry{{8, 8, 8}, {1, 1, 1}}));
    write_zero_checkpoint(dir / "zero.svck", 2, 2);
    std::string err;
    CHECK(run({"register", "--checkpoint", (dir / "zero.svck").c_str(), "--fixed",
               (dir / "a.svol").c_str(), "--moving", (dir / "b.svol").c_str()},
              nullptr, &err) == 2);
    CHECK(err.find("geometry mismatch") != std::string::npos);
}

TEST_CASE("register can resample indivisible inputs") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_reg3";
    fs::create_directories(dir);
    write_svol(dir / "odd.svol", make_phantom(GridGeometry{{15, 15, 15}, {1, 1, 1}}));
    write_zero_checkpoint(dir / "zero.svck", 2, 2);
    std::string err;
    CHECK(run({"register", "--checkpoint", (dir / "zero.svck").c_str(), "--fixed",
               (dir / "odd.svol").c_str(), "--moving", (dir / "odd.svol").c_str(),
               "--out-warped", (dir / "w.svol").c_str(), "--out-flow", (dir / "f.svol").c_str()},
              nullptr, &err) == 2);
    CHECK(run({"register", "--checkpoint", (dir / "zero.svck").c_str(), "--fixed",
               (dir / "odd.svol").c_str(), "--moving", (dir / "odd.svol").c_str(),
               "--out-warped", (dir / "w.svol").c_str(), "--out-flow", (dir / "f.svol").c_str(),
               "--resample", "16,16,16"}) == 0);
    CHECK(read_svol_scalar(dir / "w.svol").geometry.dims == std::array<int, 3>{16, 16, 16});
}

TEST_CASE("evaluate reports metrics consistent with the library") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_eval";
    fs::create_directories(dir);
    const GridGeometry g{{12, 12, 12}, {1, 1, 1}};
    const ScalarVolume fixed = make_phantom(g, 1);
    const ScalarVolume moving = make_phantom(g, 2);
    VectorField flow(g, FieldKind::displacement);
    for (auto& x : flow.comp[0]) x = 0.5;
    write_svol(dir / "fixed.svol", fixed);
    write_svol(dir / "moving.svol", moving);
    write_svol(dir / "flow.svol", flow);
    write_svol(dir / "gt.svol", flow);

    std::string out;
    CHECK(run({"evaluate", "--flow", (dir / "flow.svol").c_str(), "--gt-flow",
               (dir / "gt.svol").c_str(), "--fixed", (dir / "fixed.svol").c_str(), "--moving",
               (dir / "moving.svol").c_str()},
              &out) == 0);
    // identical flows: eps_flow exactly 0; eps_reg 0 for a translation
    CHECK(out.find("flow,0,") != std::string::npos);

    // the CSV eps_img equals the library value
    const VectorField flow_rt = read_svol_field(dir / "flow.svol");
    const double want = ncc(warp(read_svol_scalar(dir / "moving.svol"), flow_rt),
                            read_svol_scalar(dir / "fixed.svol"));
    std::istringstream lines(out);
    std::string line, row;
    while (std::getline(lines, line))
        if (line.rfind("flow,", 0) == 0) row = line;
    REQUIRE(!row.empty());
    std::istringstream cells(row);
    std::string cell;
    std::getline(cells, cell, ',');  // case id
    std::getline(cells, cell, ',');  // eps_reg
    CHECK(cell == "0");
    std::getline(cells, cell, ',');  // eps_img
    CHECK(std::stod(cell) == doctest::Approx(want).epsilon(1e-9));
    std::getline(cells, cell, ',');  // eps_flow
    CHECK(std::stod(cell) == 0.0);
}

TEST_CASE("evaluate with only a flow reports folding alone") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_eval2";
    fs::create_directories(dir);
    const GridGeometry g{{8, 8, 8}, {1, 1, 1}};
    write_svol(dir / "id.svol", VectorField(g, FieldKind::displacement));
    std::string out;
    CHECK(run({"evaluate", "--flow", (dir / "id.svol").c_str()}, &out) == 0);
    CHECK(out.find("id,0,,") != std::string::npos);  // eps_reg 0, eps_img empty
}

TEST_CASE("analyze exports jacobian and folding volumes") {
    const fs::path dir = fs::temp_directory_path() / "svflow_cli_ana";
    fs::create_directories(dir);
    const GridGeometry g{{8, 8, 8}, {1, 1, 1}};
    VectorField flow(g, FieldKind::displacement);
    std::size_t idx = 0;
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i, ++idx) flow.comp[0][idx] = 0.1 * i;
    write_svol(dir / "flow.svol", flow);
    std::string out;
    CHECK(run({"analyze", "--flow", (dir / "flow.svol").c_str(), "--out-jacobian",
               (dir / "jac.svol").c_str(), "--out-folding", (dir / "fold.svol").c_str()},
              &out) == 0);
    CHECK(out.find("eps_reg=0") != std::string::npos);
    const ScalarVolume jac = read_svol_scalar(dir / "jac.svol");
    CHECK(jac.data[jac.geometry.index(4, 4, 4)] == doctest::Approx(1.1).epsilon(1e-5));
    CHECK(run({"analyze", "--flow", (dir / "flow.svol").c_str(), "--dataset", "x"}, nullptr) == 2);
}

TEST_CASE("analyze summarizes dataset deformations") {
    const fs::path ds = fs::temp_directory_path() / "svflow_cli_ds1";
    if (!fs::exists(ds / "manifest.tsv")) {
        REQUIRE(run({"gen-insilico", "--out", ds.c_str(), "--count", "10", "--size", "16,16,16",
                     "--seed", "5"}) == 0);
    }
    std::string out;
    const fs::path csv = fs::temp_directory_path() / "svflow_cli_ana.csv";
    CHECK(run({"analyze", "--dataset", ds.c_str(), "--csv", csv.c_str()}, &out) == 0);
    CHECK(out.find("fields=10") != std::string::npos);
    const std::string text = file_bytes(csv);
    CHECK(text.find("case_id,eps_reg") != std::string::npos);
    CHECK(text.find("s0009") != std::string::npos);
}

TEST_CASE("train subcommand runs end to end with config file overrides") {
    const fs::path ds = fs::temp_directory_path() / "svflow_cli_ds1";
    if (!fs::exists(ds / "manifest.tsv")) {
        REQUIRE(run({"gen-insilico", "--out", ds.c_str(), "--count", "10", "--size", "16,16,16",
                     "--seed", "5"}) == 0);
    }
    const fs::path out_dir = fs::temp_directory_path() / "svflow_cli_train";
    fs::remove_all(out_dir);
    const fs::path cfg_file = fs::temp_directory_path() / "svflow_cli_train.cfg";
    {
        std::ofstream os(cfg_file, std::ios::trunc);
        os << "max_epochs=2\nbatch_size=4\nlevels=2\nbase_channels=2\nseed=3\n";
    }
    std::string out;
    CHECK(run({"train", "--data", ds.c_str(), "--out", out_dir.c_str(), "--config",
               cfg_file.c_str(), "--model", "svf-sum"},
              &out) == 0);
    CHECK(fs::exists(out_dir / "svf_sum" / "checkpoint.svck"));
    CHECK(fs::exists(out_dir / "svf_sum" / "train_log.tsv"));
    const std::string log = file_bytes(out_dir / "svf_sum" / "train_log.tsv");
    CHECK(log.find("epoch\ttrain_loss\tval_loss\tlr\tseconds") != std::string::npos);

    // bad config key is a data error
    {
        std::ofstream os(cfg_file, std::ios::trunc);
        os << "no_such=1\n";
    }
    std::string err;
    CHECK(run({"train", "--data", ds.c_str(), "--out", out_dir.c_str(), "--config",
               cfg_file.c_str()},
              nullptr, &err) == 2);
}

TEST_CASE("calibrate prints the sweep table") {
    std::string out;
    CHECK(run({"calibrate", "--size", "16,16,16", "--samples", "2"}, &out) == 0);
    CHECK(out.find("mean_disp_pct_extent") != std::string::npos);
    CHECK(out.find("7.7") != std::string::npos);
}
