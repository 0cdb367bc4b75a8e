#include "svflow/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "svflow/dataset.hpp"
#include "svflow/field_ops.hpp"
#include "svflow/nifti_io.hpp"
#include "svflow/phantom.hpp"
#include "svflow/train.hpp"
#include "svflow/version.hpp"
#include "svflow/volume_io.hpp"

namespace svf {

namespace {

namespace fs = std::filesystem;

std::array<int, 3> parse_triple(const std::string& s, const std::string& what) {
    std::array<int, 3> out{};
    char sep1 = 0, sep2 = 0;
    std::istringstream is(s);
    if (!(is >> out[0] >> sep1 >> out[1] >> sep2 >> out[2]) || (sep1 != ',' || sep2 != ',') ||
        !is.eof())
        throw DataError(what + ": expected X,Y,Z, got " + s);
    return out;
}

std::array<double, 3> parse_ratio_triple(const std::string& s, const std::string& what) {
    std::array<double, 3> out{};
    char sep1 = 0, sep2 = 0;
    std::istringstream is(s);
    if (!(is >> out[0] >> sep1 >> out[1] >> sep2 >> out[2]) || (sep1 != ',' || sep2 != ',') ||
        !is.eof())
        throw DataError(what + ": expected A,B,C, got " + s);
    return out;
}

std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

bool is_nifti(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    char magic[4] = {};
    is.read(magic, 4);
    return std::memcmp(magic, "SVL1", 4) != 0;
}

// reads SVOL directly; NIfTI volumes are min-max normalized to [0,1] with the
// scale reported on `out`
ScalarVolume read_volume_any(const fs::path& path, std::ostream& out) {
    if (!fs::exists(path)) throw DataError("no such file: " + path.string());
    if (!is_nifti(path)) return read_svol_scalar(path);
    NiftiVolume nii = read_nifti(path);
    const auto [offset, scale] = normalize_intensities(nii.volume);
    out << "# normalized " << path.filename().string() << " to [0,1]: offset=" << offset
        << " scale=" << scale << "\n";
    return std::move(nii.volume);
}

void provenance_line(std::ostream& os, std::uint64_t seed, std::uint64_t hash) {
    os << "# svflow " << kVersion << " seed=" << seed << " config_hash=" << std::hex << hash
       << std::dec << "\n";
}

int cmd_gen_insilico(const fs::path& out_dir, const std::string& base_path,
                     const std::array<int, 3>& size, const std::array<int, 3>& grid, int order,
                     double scale, std::uint64_t seed, int count,
                     const std::array<double, 3>& split, std::ostream& out) {
    GridGeometry geom;
    geom.dims = size;
    ScalarVolume base = base_path.empty() ? make_phantom(geom)
                                          : read_volume_any(base_path, out);
    DatasetParams params;
    params.spec.control_grid = grid;
    params.spec.order = order;
    params.spec.scale = scale;
    params.spec.seed = seed;
    params.count = count;
    params.split = split;
    generate_dataset(base, params, out_dir);

    SampleStore store(out_dir);
    int n_train = 0, n_val = 0, n_test = 0;
    for (const auto& e : store.entries()) {
        if (e.split == Split::train) ++n_train;
        else if (e.split == Split::val) ++n_val;
        else ++n_test;
    }
    out << "wrote " << store.entries().size() << " samples to " << out_dir.string() << " ("
        << n_train << " train / " << n_val << " val / " << n_test << " test)\n";
    return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& out_dir, const std::string& config_path,
              const std::string& model, const std::vector<std::string>& ablation,
              const std::vector<double>& sweep_lambdas, NetConfig net, TrainConfig cfg,
              const KeyValues& flag_overrides, std::ostream& out) {
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw DataError("cannot open config: " + config_path);
        apply_config(parse_key_values(is), net, cfg);
    }
    // explicit command-line flags win over the config file
    apply_config(flag_overrides, net, cfg);
    SampleStore store(data_dir);
    fs::create_directories(out_dir);
    provenance_line(out, cfg.seed, config_hash(net, cfg));

    if (!ablation.empty()) {
        const auto rows = run_ablation(store, cfg, ablation, net, out_dir, &out);
        std::ostringstream prov;
        prov << "seed=" << cfg.seed << " data=" << data_dir.string();
        const fs::path csv = out_dir / "ablation.csv";
        std::ofstream os(csv, std::ios::trunc);
        write_ablation_csv(os, rows, prov.str());
        write_ablation_csv(out, rows, prov.str());
        out << "wrote " << csv.string() << "\n";
        return 0;
    }
    if (!sweep_lambdas.empty()) {
        if (!model.empty()) net = model_preset(model, net.levels, net.base_channels);
        const auto rows = run_lambda_sweep(store, cfg, net, sweep_lambdas, out_dir, &out);
        std::ostringstream prov;
        prov << "seed=" << cfg.seed << " data=" << data_dir.string();
        const fs::path csv = out_dir / "lambda_sweep.csv";
        std::ofstream os(csv, std::ios::trunc);
        write_lambda_sweep_csv(os, rows, prov.str());
        write_lambda_sweep_csv(out, rows, prov.str());
        out << "wrote " << csv.string() << "\n";
        return 0;
    }

    if (!model.empty()) net = model_preset(model, net.levels, net.base_channels);
    const std::string run_name = model.empty() ? "model" : model;
    const TrainResult r = train_model(net, store, cfg, out_dir, run_name, &out);
    out << "trained " << run_name << ": epochs=" << r.epochs << " best_val=" << r.best_val
        << " checkpoint=" << r.checkpoint_path.string() << "\n";
    return 0;
}

int cmd_register(const fs::path& ckpt_path, const fs::path& fixed_path,
                 const fs::path& moving_path, const fs::path& warped_out,
                 const fs::path& flow_out, const fs::path& svf_out,
                 const std::string& resample_spec, std::ostream& out) {
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    const NetConfig net = net_config_from_entries(ckpt.config);
    RegistrationModel<float> model(net, 0);
    model.load(ckpt);

    ScalarVolume fixed = read_volume_any(fixed_path, out);
    ScalarVolume moving = read_volume_any(moving_path, out);
    require_same_geometry(fixed.geometry, moving.geometry, "register");

    if (!resample_spec.empty()) {
        GridGeometry target = fixed.geometry;
        target.dims = parse_triple(resample_spec, "--resample");
        for (int a = 0; a < 3; ++a)
            target.spacing[a] = fixed.geometry.spacing[a] *
                                static_cast<double>(fixed.geometry.dims[a] - 1) /
                                std::max(1, target.dims[a] - 1);
        fixed = resample_volume(fixed, target);
        moving = resample_volume(moving, target);
    }

    const auto result = run_registration(model, fixed, moving);
    const ScalarVolume warped = warp(moving, result.phi);
    write_svol(warped_out, warped);
    write_svol(flow_out, result.phi);
    if (!svf_out.empty()) {
        if (!result.svf) throw DataError("--out-svf: checkpoint is not an SVF model");
        write_svol(svf_out, *result.svf);
    }

    TrainConfig scratch;
    provenance_line(out, 0, config_hash(net, scratch));
    const auto [map, eps_reg] = folding_count(result.phi);
    (void)map;
    char line[64];
    std::snprintf(line, sizeof(line), "eps_reg=%lld eps_img=%.6f\n", eps_reg,
                  ncc(warped, fixed));
    out << line;
    return 0;
}

int cmd_evaluate(const fs::path& flow_path, const std::string& gt_flow_path,
                 const std::string& fixed_path, const std::string& moving_path,
                 const std::string& csv_path, std::ostream& out) {
    const VectorField phi = read_svol_field(flow_path);
    CaseMetrics m;
    m.case_id = flow_path.stem().string();
    m.eps_reg = folding_count(phi).second;
    if (!gt_flow_path.empty()) {
        const VectorField gt = read_svol_field(gt_flow_path);
        m.eps_flow = flow_sse(phi, gt);
    }
    if (!fixed_path.empty() != !moving_path.empty())
        throw DataError("evaluate: --fixed and --moving must be given together");
    if (!fixed_path.empty()) {
        const ScalarVolume f0 = read_volume_any(fixed_path, out);
        const ScalarVolume f1 = read_volume_any(moving_path, out);
        m.eps_img = ncc(warp(f1, phi), f0);
    }
    const ScalarVolume det = jacobian_determinant(phi);
    double jm = 0.0;
    for (double d : det.data) jm += d;
    m.mean_jac = jm / static_cast<double>(det.data.size());
    const DisplacementStats st = displacement_stats(std::span(&phi, 1), phi.geometry.spacing);
    m.mean_disp_mm = st.mean_displacement_mm;

    std::ostringstream prov;
    prov << "flow=" << flow_path.string();
    if (csv_path.empty()) {
        write_metrics_csv(out, std::span(&m, 1), prov.str());
    } else {
        std::ofstream os(csv_path, std::ios::trunc);
        write_metrics_csv(os, std::span(&m, 1), prov.str());
        out << "wrote " << csv_path << "\n";
    }
    return 0;
}

int cmd_analyze(const std::string& flow_path, const std::string& dataset_dir,
                const std::string& jac_out, const std::string& fold_out,
                const std::string& csv_path, std::ostream& out) {
    if (flow_path.empty() == dataset_dir.empty())
        throw DataError("analyze: give exactly one of --flow or --dataset");

    if (!flow_path.empty()) {
        const VectorField phi = read_svol_field(flow_path);
        const ScalarVolume det = jacobian_determinant(phi);
        const auto [fold, eps_reg] = folding_count(phi);
        if (!jac_out.empty()) write_svol(jac_out, det);
        if (!fold_out.empty()) {
            ScalarVolume fmap(fold.geometry);
            for (std::size_t i = 0; i < fold.flags.size(); ++i) fmap.data[i] = fold.flags[i];
            write_svol(fold_out, fmap);
        }
        const DisplacementStats st = displacement_stats(std::span(&phi, 1), phi.geometry.spacing);
        out << "eps_reg=" << eps_reg << " mean_jac=" << st.mean_jacobian
            << " mean_disp_mm=" << st.mean_displacement_mm << "\n";
        return 0;
    }

    SampleStore store(dataset_dir);
    std::vector<VectorField> phis;
    std::vector<CaseMetrics> rows;
    for (std::size_t i = 0; i < store.entries().size(); ++i) {
        const LoadedSample& s = store.load(static_cast<int>(i));
        if (!s.phi_hat) continue;
        phis.push_back(*s.phi_hat);
        CaseMetrics m;
        m.case_id = store.entries()[i].id;
        m.eps_reg = folding_count(*s.phi_hat).second;
        const DisplacementStats st =
            displacement_stats(std::span(&*s.phi_hat, 1), s.phi_hat->geometry.spacing);
        m.mean_jac = st.mean_jacobian;
        m.mean_disp_mm = st.mean_displacement_mm;
        rows.push_back(std::move(m));
    }
    if (phis.empty()) throw DataError("analyze: dataset has no deformation fields");
    const DisplacementStats st = displacement_stats(phis, phis.front().geometry.spacing);
    out << "fields=" << phis.size() << " mean_jac=" << st.mean_jacobian << " +- "
        << st.sd_jacobian << " mean_disp_mm=" << st.mean_displacement_mm << " +- "
        << st.sd_displacement_mm << "\n";
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        std::ostringstream prov;
        prov << "dataset=" << dataset_dir;
        write_metrics_csv(os, rows, prov.str());
        out << "wrote " << csv_path << "\n";
    }
    return 0;
}

// reproduces the calibration sweep behind kDefaultBsplineScale
int cmd_calibrate(const std::array<int, 3>& size, int samples, std::ostream& out) {
    GridGeometry geom;
    geom.dims = size;
    out << "scale\tmean_disp_voxels\tmean_disp_pct_extent\tmean_jac\tfold_rate\n";
    for (double scale : {2.0, 4.0, 6.0, 7.7, 8.0, 10.0, 12.0}) {
        BsplineDeformationSpec spec;
        spec.scale = scale;
        double disp = 0.0, jac = 0.0;
        int folded = 0;
        for (int i = 0; i < samples; ++i) {
            Rng rng = Rng::stream(7777, static_cast<std::uint64_t>(i));
            const VectorField u = generate_bspline_deformation(spec, geom, rng);
            const DisplacementStats st = displacement_stats(std::span(&u, 1), {1, 1, 1});
            disp += st.mean_displacement_mm;
            jac += st.mean_jacobian;
            if (folding_count(u).second > 0) ++folded;
        }
        disp /= samples;
        jac /= samples;
        const double extent = static_cast<double>(size[0] - 1);
        out << scale << "\t" << disp << "\t" << 100.0 * disp / extent << "\t" << jac << "\t"
            << static_cast<double>(folded) / samples << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"svflow: diffeomorphic 3-D registration toolkit"};
    app.require_subcommand(1);

    // gen-insilico
    auto* gen = app.add_subcommand("gen-insilico", "generate a synthetic registration dataset");
    std::string gen_out, gen_base, gen_size = "32,32,32", gen_grid = "3,3,3", gen_split = "0.8,0.1,0.1";
    int gen_order = 5, gen_count = 100;
    double gen_scale = kDefaultBsplineScale;
    std::uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--count", gen_count, "number of samples");
    gen->add_option("--base", gen_base, "base volume (SVOL or NIfTI); default: phantom");
    gen->add_option("--size", gen_size, "volume dims X,Y,Z");
    gen->add_option("--grid", gen_grid, "control grid X,Y,Z");
    gen->add_option("--order", gen_order, "B-spline order");
    gen->add_option("--scale", gen_scale, "displacement scale (voxels)");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--split", gen_split, "train,val,test ratios");

    // train
    auto* train = app.add_subcommand("train", "train a registration model");
    std::string train_data, train_out, train_config, train_model_name = "svf-bchd";
    std::string train_ablation, train_sweep;
    NetConfig net_cfg;
    TrainConfig train_cfg;
    std::string train_mode;
    bool train_timing = false;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--model", train_model_name, "model preset name");
    train->add_option("--ablation", train_ablation, "comma-separated model list");
    train->add_option("--sweep-lambda", train_sweep, "comma-separated lambda list");
    train->add_option("--mode", train_mode, "supervised|unsupervised");
    train->add_option("--lambda", train_cfg.lambda, "regularization weight");
    train->add_option("--smooth-order", train_cfg.smooth_order, "L_smooth order (1 or 2)");
    train->add_option("--lr0", train_cfg.lr0, "initial learning rate");
    train->add_option("--batch-size", train_cfg.batch_size, "batch size");
    train->add_option("--seed", train_cfg.seed, "RNG seed");
    train->add_option("--max-epochs", train_cfg.max_epochs, "epoch cap");
    train->add_option("--levels", net_cfg.levels, "pyramid levels");
    train->add_option("--base-channels", net_cfg.base_channels, "encoder base channels");
    train->add_flag("--timing", train_timing, "record wall time in the log (non-deterministic)");

    // register
    auto* reg = app.add_subcommand("register", "register a moving volume to a fixed volume");
    std::string reg_ckpt, reg_fixed, reg_moving, reg_warped = "warped.svol",
                reg_flow = "flow.svol", reg_svf, reg_resample;
    reg->add_option("--checkpoint", reg_ckpt, "model checkpoint")->required();
    reg->add_option("--fixed", reg_fixed, "fixed volume f0")->required();
    reg->add_option("--moving", reg_moving, "moving volume f1")->required();
    reg->add_option("--out-warped", reg_warped, "output warped volume");
    reg->add_option("--out-flow", reg_flow, "output deformation field");
    reg->add_option("--out-svf", reg_svf, "output velocity field (SVF models)");
    reg->add_option("--resample", reg_resample, "resample inputs to X,Y,Z before registering");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "compute metrics for a deformation field");
    std::string eval_flow, eval_gt, eval_fixed, eval_moving, eval_csv;
    eval->add_option("--flow", eval_flow, "deformation field (SVOL)")->required();
    eval->add_option("--gt-flow", eval_gt, "ground-truth deformation field");
    eval->add_option("--fixed", eval_fixed, "fixed volume");
    eval->add_option("--moving", eval_moving, "moving volume");
    eval->add_option("--csv", eval_csv, "write the CSV report here instead of stdout");

    // analyze
    auto* ana = app.add_subcommand("analyze", "deformation quality analysis");
    std::string ana_flow, ana_dataset, ana_jac, ana_fold, ana_csv;
    ana->add_option("--flow", ana_flow, "deformation field (SVOL)");
    ana->add_option("--dataset", ana_dataset, "dataset directory (analyzes ground-truth fields)");
    ana->add_option("--out-jacobian", ana_jac, "write det(J) volume here");
    ana->add_option("--out-folding", ana_fold, "write folding map here");
    ana->add_option("--csv", ana_csv, "write per-case CSV here");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "reproduce the generator scale calibration sweep");
    std::string cal_size = "32,32,32";
    int cal_samples = 25;
    cal->add_option("--size", cal_size, "volume dims X,Y,Z");
    cal->add_option("--samples", cal_samples, "fields per scale");

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed())
            return cmd_gen_insilico(gen_out, gen_base, parse_triple(gen_size, "--size"),
                                    parse_triple(gen_grid, "--grid"), gen_order, gen_scale,
                                    gen_seed, gen_count,
                                    parse_ratio_triple(gen_split, "--split"), out);
        if (train->parsed()) {
            KeyValues overrides;
            const auto forward_flag = [&](const char* flag, const char* key, const auto& value) {
                if (train->count(flag) > 0) {
                    std::ostringstream v;
                    v.precision(17);
                    v << value;
                    overrides.emplace_back(key, v.str());
                }
            };
            forward_flag("--mode", "mode", train_mode);
            forward_flag("--lambda", "lambda", train_cfg.lambda);
            forward_flag("--smooth-order", "smooth_order", train_cfg.smooth_order);
            forward_flag("--lr0", "lr0", train_cfg.lr0);
            forward_flag("--batch-size", "batch_size", train_cfg.batch_size);
            forward_flag("--seed", "seed", train_cfg.seed);
            forward_flag("--max-epochs", "max_epochs", train_cfg.max_epochs);
            forward_flag("--levels", "levels", net_cfg.levels);
            forward_flag("--base-channels", "base_channels", net_cfg.base_channels);
            train_cfg.deterministic = !train_timing;
            std::vector<double> sweep;
            for (const auto& s : parse_list(train_sweep)) sweep.push_back(std::stod(s));
            return cmd_train(train_data, train_out, train_config, train_model_name,
                             parse_list(train_ablation), sweep, net_cfg, train_cfg, overrides,
                             out);
        }
        if (reg->parsed())
            return cmd_register(reg_ckpt, reg_fixed, reg_moving, reg_warped, reg_flow, reg_svf,
                                reg_resample, out);
        if (eval->parsed())
            return cmd_evaluate(eval_flow, eval_gt, eval_fixed, eval_moving, eval_csv, out);
        if (ana->parsed())
            return cmd_analyze(ana_flow, ana_dataset, ana_jac, ana_fold, ana_csv, out);
        if (cal->parsed()) return cmd_calibrate(parse_triple(cal_size, "--size"), cal_samples, out);
        err << "usage error: no subcommand\n";
        return 1;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace svf
