#include "svflow/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "svflow/field_ops.hpp"
#include "svflow/version.hpp"

namespace svf {

double loss_supervised(const VectorField& phi, const VectorField& phi_hat) {
    return flow_sse(phi, phi_hat);
}

double smoothness_penalty(const VectorField& u, int order) {
    if (order != 1 && order != 2) throw DataError("smoothness_penalty: order must be 1 or 2");
    const GridGeometry& g = u.geometry;
    std::vector<std::vector<double>> channels(u.comp.begin(), u.comp.end());
    for (int n = 0; n < order; ++n) {
        std::vector<std::vector<double>> next;
        next.reserve(channels.size() * 3);
        for (const auto& c : channels)
            for (int ax = 0; ax < 3; ++ax) next.push_back(axis_derivative(g, c, ax));
        channels = std::move(next);
    }
    double acc = 0.0;
    for (const auto& c : channels)
        for (double x : c) acc += x * x;
    return acc / (3.0 * static_cast<double>(g.voxel_count()));
}

double loss_unsupervised(const ScalarVolume& f0, const ScalarVolume& f1, const VectorField& phi,
                         double lambda, int smooth_order) {
    if (lambda < 0.0 || lambda > 1.0) throw DataError("lambda must be in [0,1]");
    const double sim = -ncc(warp(f1, phi), f0);
    if (lambda == 0.0) return sim;
    return (1.0 - lambda) * sim + lambda * smoothness_penalty(phi, smooth_order);
}

void sgd_momentum_update(std::span<float> theta, std::span<const float> grad,
                         std::span<float> momentum, double lr, double beta) {
    if (theta.size() != grad.size() || theta.size() != momentum.size())
        throw DataError("sgd_momentum_update: shape mismatch");
    const float b = static_cast<float>(beta);
    const float step = static_cast<float>(lr);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        momentum[i] = b * momentum[i] + grad[i];
        theta[i] -= step * momentum[i];
    }
}

SgdMomentum::SgdMomentum(std::vector<std::pair<std::string, ad::NodePtr<float>>>& params) {
    for (auto& [name, node] : params) {
        params_.push_back(node);
        momentum_.emplace_back(node->val.v.size(), 0.0f);
    }
}

void SgdMomentum::zero_grad() {
    for (auto& p : params_) {
        p->ensure_grad();
        p->zero_grad();
    }
}

void SgdMomentum::step(double lr, double beta) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        p->ensure_grad();
        sgd_momentum_update(p->val.v, p->grad.v, momentum_[i], lr, beta);
    }
}

PlateauScheduler::Decision PlateauScheduler::step(double val_loss) {
    if (!std::isfinite(val_loss))
        throw NumericalError("plateau scheduler: non-finite validation loss");
    Decision d{lr_, false, false};
    if (!has_best_ || val_loss < best_ - std::fabs(best_) * rel_threshold_) {
        has_best_ = true;
        best_ = val_loss;
        bad_ = 0;
    } else if (++bad_ >= patience_) {
        lr_ *= factor_;
        bad_ = 0;
        d.reduced = true;
    }
    d.lr = lr_;
    d.stop = lr_ < lr_stop_;
    return d;
}

namespace {

struct SampleTensors {
    ad::Tensor<float> f0, f1;
    std::optional<ad::Tensor<float>> phi_hat;
    GridGeometry geom;
};

SampleTensors to_tensors(const LoadedSample& s) {
    SampleTensors t;
    t.f0 = ad::tensor_from_volume<float>(s.f0);
    t.f1 = ad::tensor_from_volume<float>(s.f1);
    if (s.phi_hat) t.phi_hat = ad::tensor_from_field<float>(*s.phi_hat);
    t.geom = s.f0.geometry;
    return t;
}

// loss node for one sample; phi comes out of the model forward
ad::NodePtr<float> sample_loss(ad::Tape<float>& tape, const TrainConfig& cfg,
                               const SampleTensors& t, const ad::NodePtr<float>& f0,
                               const ad::NodePtr<float>& f1, const ad::NodePtr<float>& phi) {
    if (cfg.mode == TrainMode::supervised) {
        if (!t.phi_hat)
            throw DataError("supervised training requires ground-truth deformations");
        return ad::flow_mse(tape, phi, ad::make_leaf(*t.phi_hat));
    }
    return ad::unsupervised_loss(tape, f0, f1, phi, cfg.lambda, cfg.smooth_order);
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return out;
}

}  // namespace

TrainResult train_model(const NetConfig& net_cfg, SampleStore& store, const TrainConfig& cfg,
                        const std::filesystem::path& out_dir, const std::string& run_name,
                        std::ostream* progress) {
    net_cfg.validate();
    cfg.validate();

    auto train_idx = store.indices(Split::train);
    const auto val_idx = store.indices(Split::val);
    if (train_idx.empty()) throw DataError("train: empty train split");
    if (val_idx.empty()) throw DataError("train: empty validation split");

    // materialize train+val tensors up front, in index order; the test split
    // is deliberately never touched here
    std::map<int, SampleTensors> data;
    for (int i : train_idx) data.emplace(i, to_tensors(store.load(i)));
    for (int i : val_idx) data.emplace(i, to_tensors(store.load(i)));

    RegistrationModel<float> model(net_cfg, cfg.seed);
    SgdMomentum opt(model.parameters());
    PlateauScheduler sched(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience,
                           cfg.plateau_rel_threshold, cfg.lr_stop);

    namespace fs = std::filesystem;
    const fs::path run_dir = out_dir / sanitize(run_name);
    fs::create_directories(run_dir);
    TrainResult result;
    result.checkpoint_path = run_dir / "checkpoint.svck";
    result.log_path = run_dir / "train_log.tsv";

    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write training log: " + result.log_path.string());
    log << "# svflow " << kVersion << " training log: " << run_name << "\n";
    log << "# seed=" << cfg.seed << " config_hash=" << std::hex << config_hash(net_cfg, cfg)
        << std::dec << "\n";
    log << "epoch\ttrain_loss\tval_loss\tlr\tseconds\n";

    double lr = cfg.lr0;
    double best_val = 0.0;
    bool has_best = false;

    // returns the raw sample loss; when training, backprops loss/batch_n so
    // the accumulated gradient is the batch mean
    const auto forward_loss = [&](int idx, bool with_grad, int batch_n) {
        const SampleTensors& t = data.at(idx);
        ad::Tape<float> tape;
        tape.recording = with_grad;
        auto f0 = ad::make_leaf(t.f0);
        auto f1 = ad::make_leaf(t.f1);
        auto fwd = model.forward(tape, f0, f1);
        auto loss = sample_loss(tape, cfg, t, f0, f1, fwd.phi);
        const double value = loss->val.v[0];
        if (!std::isfinite(value))
            throw NumericalError("training aborted: non-finite loss on sample " +
                                 store.entries()[static_cast<std::size_t>(idx)].id);
        if (with_grad) tape.backward(ad::scale(tape, loss, 1.0 / batch_n));
        return value;
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = Rng::stream(cfg.seed, 0x5u * 1000003u + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(train_idx);

        double train_loss = 0.0;
        for (std::size_t b = 0; b < train_idx.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(train_idx.size(), b + static_cast<std::size_t>(cfg.batch_size));
            opt.zero_grad();
            const int batch_n = static_cast<int>(end - b);
            for (std::size_t s = b; s < end; ++s)
                train_loss += forward_loss(train_idx[s], true, batch_n);
            opt.step(lr, cfg.momentum);
        }
        train_loss /= static_cast<double>(train_idx.size());

        double val_loss = 0.0;
        for (int idx : val_idx) val_loss += forward_loss(idx, false, 1);
        val_loss /= static_cast<double>(val_idx.size());

        const double seconds =
            cfg.deterministic
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        char row[160];
        std::snprintf(row, sizeof(row), "%d\t%.9g\t%.9g\t%.9g\t%.3f\n", epoch, train_loss,
                      val_loss, lr, seconds);
        log << row;
        log.flush();
        if (progress) {
            *progress << run_name << " epoch " << epoch << " train " << train_loss << " val "
                      << val_loss << " lr " << lr << "\n";
            progress->flush();
        }

        if (!has_best || val_loss < best_val) {
            has_best = true;
            best_val = val_loss;
            write_checkpoint(result.checkpoint_path, model.to_checkpoint(cfg));
        }
        result.epochs = epoch;
        result.final_val = val_loss;

        const auto decision = sched.step(val_loss);
        lr = decision.lr;
        if (decision.stop) break;
    }
    result.best_val = best_val;
    return result;
}

std::vector<CaseMetrics> evaluate_split(RegistrationModel<float>& model, SampleStore& store,
                                        Split split) {
    std::vector<CaseMetrics> rows;
    for (int idx : store.indices(split)) {
        const LoadedSample& s = store.load(idx);
        const auto out = run_registration(model, s.f0, s.f1);
        CaseMetrics m;
        m.case_id = store.entries()[static_cast<std::size_t>(idx)].id;
        m.eps_reg = folding_count(out.phi).second;
        m.eps_img = ncc(warp(s.f1, out.phi), s.f0);
        if (s.phi_hat) m.eps_flow = flow_sse(out.phi, *s.phi_hat);
        const ScalarVolume det = jacobian_determinant(out.phi);
        double jm = 0.0;
        for (double d : det.data) jm += d;
        m.mean_jac = jm / static_cast<double>(det.data.size());
        double dm = 0.0;
        const auto& sp = out.phi.geometry.spacing;
        const std::size_t n = out.phi.geometry.voxel_count();
        for (std::size_t i = 0; i < n; ++i) {
            const double ux = out.phi.comp[0][i] * sp[0];
            const double uy = out.phi.comp[1][i] * sp[1];
            const double uz = out.phi.comp[2][i] * sp[2];
            dm += std::sqrt(ux * ux + uy * uy + uz * uz);
        }
        m.mean_disp_mm = dm / static_cast<double>(n);
        rows.push_back(std::move(m));
    }
    return rows;
}

RegistrationOutput run_registration(RegistrationModel<float>& model, const ScalarVolume& fixed,
                                    const ScalarVolume& moving) {
    require_same_geometry(fixed.geometry, moving.geometry, "run_registration");
    ad::Tape<float> tape;
    tape.recording = false;
    auto f0 = ad::make_leaf(ad::tensor_from_volume<float>(fixed));
    auto f1 = ad::make_leaf(ad::tensor_from_volume<float>(moving));
    const auto fwd = model.forward(tape, f0, f1);
    RegistrationOutput out{ad::field_from_tensor(fwd.phi->val, fixed.geometry), {}};
    if (fwd.svf)
        out.svf = ad::field_from_tensor(fwd.svf->val, fixed.geometry, FieldKind::velocity);
    return out;
}

std::vector<AblationRow> run_ablation(SampleStore& store, const TrainConfig& cfg,
                                      const std::vector<std::string>& model_names,
                                      const NetConfig& shape_defaults,
                                      const std::filesystem::path& out_dir,
                                      std::ostream* progress) {
    if (model_names.size() < 2) throw DataError("ablation requires at least 2 models");
    std::vector<AblationRow> rows;
    for (const auto& name : model_names) {
        NetConfig net = model_preset(name, shape_defaults.levels, shape_defaults.base_channels);
        net.bchd = shape_defaults.bchd;
        net.exp_steps = shape_defaults.exp_steps;
        const TrainResult tr = train_model(net, store, cfg, out_dir, name, progress);

        RegistrationModel<float> model(net, cfg.seed);
        model.load(read_checkpoint(tr.checkpoint_path));
        const auto cases = evaluate_split(model, store, Split::test);
        if (cases.empty()) throw DataError("ablation: empty test split");

        AblationRow row;
        row.model = name;
        std::vector<double> flows, imgs;
        for (const auto& c : cases) {
            if (c.eps_flow) flows.push_back(*c.eps_flow);
            if (c.eps_img) imgs.push_back(*c.eps_img);
            row.eps_reg_total += c.eps_reg.value_or(0);
        }
        if (!flows.empty()) {
            row.eps_flow_median = median(flows);
            row.eps_flow_mean = mean_of(flows);
            row.eps_flow_sd = sd_of(flows);
        }
        row.eps_img_mean = mean_of(imgs);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows,
                        const std::string& provenance) {
    os << "# svflow " << kVersion << " ablation report\n";
    if (!provenance.empty()) os << "# " << provenance << "\n";
    os << "# eps_flow in voxel^2 (per-voxel mean squared flow difference) over the test split; "
          "eps_reg summed over test cases; eps_img is mean NCC\n";
    os << "model,eps_flow_median,eps_flow_mean,eps_flow_sd,eps_reg_total,eps_img_mean\n";
    os.precision(10);
    for (const auto& r : rows)
        os << r.model << "," << r.eps_flow_median << "," << r.eps_flow_mean << ","
           << r.eps_flow_sd << "," << r.eps_reg_total << "," << r.eps_img_mean << "\n";
}

std::vector<LambdaSweepRow> run_lambda_sweep(SampleStore& store, const TrainConfig& cfg,
                                             const NetConfig& net_cfg,
                                             const std::vector<double>& lambdas,
                                             const std::filesystem::path& out_dir,
                                             std::ostream* progress) {
    if (lambdas.empty()) throw DataError("lambda sweep: empty lambda list");
    std::vector<LambdaSweepRow> rows;
    for (double lambda : lambdas) {
        TrainConfig c = cfg;
        c.mode = TrainMode::unsupervised;
        c.lambda = lambda;
        std::ostringstream name;
        name << "lambda_" << lambda;
        const TrainResult tr = train_model(net_cfg, store, c, out_dir, name.str(), progress);

        RegistrationModel<float> model(net_cfg, c.seed);
        model.load(read_checkpoint(tr.checkpoint_path));
        const auto cases = evaluate_split(model, store, Split::test);

        LambdaSweepRow row;
        row.lambda = lambda;
        std::vector<double> flows, imgs;
        for (const auto& c2 : cases) {
            if (c2.eps_flow) flows.push_back(*c2.eps_flow);
            if (c2.eps_img) imgs.push_back(*c2.eps_img);
            row.eps_reg_total += c2.eps_reg.value_or(0);
        }
        if (!flows.empty()) {
            row.eps_flow_median = median(flows);
            row.eps_flow_mean = mean_of(flows);
        }
        row.eps_img_mean = mean_of(imgs);
        rows.push_back(row);
    }
    return rows;
}

void write_lambda_sweep_csv(std::ostream& os, std::span<const LambdaSweepRow> rows,
                            const std::string& provenance) {
    os << "# svflow " << kVersion << " lambda sweep report\n";
    if (!provenance.empty()) os << "# " << provenance << "\n";
    os << "lambda,eps_flow_median,eps_flow_mean,eps_reg_total,eps_img_mean\n";
    os.precision(10);
    for (const auto& r : rows)
        os << r.lambda << "," << r.eps_flow_median << "," << r.eps_flow_mean << ","
           << r.eps_reg_total << "," << r.eps_img_mean << "\n";
}

}  // namespace svf
