#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "svflow/dataset.hpp"
#include "svflow/metrics.hpp"
#include "svflow/nets.hpp"
#include "svflow/train_config.hpp"

namespace svf {

// -- losses (library-precision definitions; the graph versions mirror them) --

// identical to flow_sse: one definition, two call sites
double loss_supervised(const VectorField& phi, const VectorField& phi_hat);

// L_smooth(u, n) = 1/(3|Omega|) sum |grad^n u|^2, central differences
double smoothness_penalty(const VectorField& u, int order);

// (1-lambda) * (-NCC(warp(f1, phi), f0)) + lambda * L_smooth(phi, n)
double loss_unsupervised(const ScalarVolume& f0, const ScalarVolume& f1, const VectorField& phi,
                         double lambda, int smooth_order);

// -- optimizer / scheduler --

// m <- beta m + g; theta <- theta - lr m
void sgd_momentum_update(std::span<float> theta, std::span<const float> grad,
                         std::span<float> momentum, double lr, double beta);

class SgdMomentum {
  public:
    explicit SgdMomentum(std::vector<std::pair<std::string, ad::NodePtr<float>>>& params);
    void zero_grad();
    void step(double lr, double beta);

  private:
    std::vector<ad::NodePtr<float>> params_;
    std::vector<std::vector<float>> momentum_;
};

class PlateauScheduler {
  public:
    PlateauScheduler(double lr0, double factor, int patience, double rel_threshold,
                     double lr_stop)
        : lr_(lr0), factor_(factor), rel_threshold_(rel_threshold), lr_stop_(lr_stop),
          patience_(patience) {}

    struct Decision {
        double lr;
        bool reduced;
        bool stop;
    };

    // one call per epoch with the validation loss
    Decision step(double val_loss);

    double lr() const { return lr_; }

  private:
    double lr_, factor_, rel_threshold_, lr_stop_;
    int patience_, bad_ = 0;
    bool has_best_ = false;
    double best_ = 0.0;
};

// -- experiment drivers --

struct TrainResult {
    int epochs = 0;
    double best_val = 0.0;
    double final_val = 0.0;
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;
};

// Epochs over the shuffled train split; the per-epoch validation loss drives
// the plateau scheduler; the best-val checkpoint is persisted; the test split
// is never read. Fully deterministic given the seed.
TrainResult train_model(const NetConfig& net_cfg, SampleStore& store, const TrainConfig& cfg,
                        const std::filesystem::path& out_dir, const std::string& run_name,
                        std::ostream* progress = nullptr);

std::vector<CaseMetrics> evaluate_split(RegistrationModel<float>& model, SampleStore& store,
                                        Split split);

struct RegistrationOutput {
    VectorField phi;
    std::optional<VectorField> svf;
};

RegistrationOutput run_registration(RegistrationModel<float>& model, const ScalarVolume& fixed,
                                    const ScalarVolume& moving);

struct AblationRow {
    std::string model;
    double eps_flow_median = 0.0;
    double eps_flow_mean = 0.0;
    double eps_flow_sd = 0.0;
    long long eps_reg_total = 0;
    double eps_img_mean = 0.0;
};

// Trains every named model with the identical config/seed and reports test
// split metrics, one row per model.
std::vector<AblationRow> run_ablation(SampleStore& store, const TrainConfig& cfg,
                                      const std::vector<std::string>& model_names,
                                      const NetConfig& shape_defaults,
                                      const std::filesystem::path& out_dir,
                                      std::ostream* progress = nullptr);

void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows,
                        const std::string& provenance);

struct LambdaSweepRow {
    double lambda = 0.0;
    double eps_flow_median = 0.0;
    double eps_flow_mean = 0.0;
    long long eps_reg_total = 0;
    double eps_img_mean = 0.0;
};

std::vector<LambdaSweepRow> run_lambda_sweep(SampleStore& store, const TrainConfig& cfg,
                                             const NetConfig& net_cfg,
                                             const std::vector<double>& lambdas,
                                             const std::filesystem::path& out_dir,
                                             std::ostream* progress = nullptr);

void write_lambda_sweep_csv(std::ostream& os, std::span<const LambdaSweepRow> rows,
                            const std::string& provenance);

}  // namespace svf
