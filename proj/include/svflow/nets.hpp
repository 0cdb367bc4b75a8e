#pragma once

#include <string>
#include <utility>
#include <vector>

#include "svflow/ad/graph_ops.hpp"
#include "svflow/checkpoint.hpp"
#include "svflow/config.hpp"
#include "svflow/net_config.hpp"
#include "svflow/rng.hpp"

namespace svf {

// Model zoo: plain U-Net baseline, Flow U-Net variants (deformation placement
// x propagation) and the SVF-parameterized nets (summation or BCHD
// propagation). One shared-weight encoder per stream; flow estimated coarse
// to fine; flow-emitting convolutions start at zero so every variant begins
// as the identity registration.
template <typename T>
class RegistrationModel {
  public:
    RegistrationModel(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed ^ 0x6e657473ULL);
        const int L = cfg_.levels;
        const int C = cfg_.base_channels;
        if (cfg_.variant == Variant::unet) {
            add_conv("enc0", C, 2, rng);
            for (int i = 1; i < L; ++i) add_conv("enc" + std::to_string(i), C << i, C << (i - 1), rng);
            for (int i = L - 2; i >= 0; --i)
                add_conv("dec" + std::to_string(i), C << i, 3 * (C << i), rng);
            add_conv("flowhead", 3, C, rng, /*zero_init=*/true);
        } else {
            add_conv("enc0", C, 1, rng);
            for (int i = 1; i < L; ++i) add_conv("enc" + std::to_string(i), C << i, C << (i - 1), rng);
            for (int l = 1; l <= L; ++l) {
                const int cl = C << (L - l);
                add_conv("flow" + std::to_string(l) + ".conv1", cl, 2 * cl, rng);
                add_conv("flow" + std::to_string(l) + ".conv2", 3, cl, rng, /*zero_init=*/true);
            }
        }
    }

    struct ForwardResult {
        ad::NodePtr<T> phi;                            // {3,D,H,W} displacement
        ad::NodePtr<T> svf;                            // final SVF (svf models only)
        std::vector<ad::NodePtr<T>> level_fields;      // carried field per level, coarse first
        std::vector<ad::NodePtr<T>> level_deformations;  // phi^(l) per level where formed
    };

    ForwardResult forward(ad::Tape<T>& tape, const ad::NodePtr<T>& f0,
                          const ad::NodePtr<T>& f1) const {
        check_input(f0->val);
        check_input(f1->val);
        if (f0->val.shape != f1->val.shape) throw DataError("forward: input shape mismatch");
        if (cfg_.variant == Variant::unet) return forward_unet(tape, f0, f1);
        return forward_pyramid(tape, f0, f1);
    }

    std::vector<std::pair<std::string, ad::NodePtr<T>>>& parameters() { return params_; }
    const std::vector<std::pair<std::string, ad::NodePtr<T>>>& parameters() const { return params_; }
    const NetConfig& config() const { return cfg_; }

    Checkpoint to_checkpoint(const TrainConfig& train) const {
        Checkpoint ckpt;
        ckpt.config = net_config_entries(cfg_);
        for (const auto& [k, v] : train_config_entries(train)) ckpt.config.emplace_back(k, v);
        for (const auto& [name, node] : params_) {
            CheckpointParam p;
            p.name = name;
            p.shape = node->val.shape;
            p.data.reserve(node->val.v.size());
            for (const T x : node->val.v) p.data.push_back(static_cast<float>(x));
            ckpt.params.push_back(std::move(p));
        }
        return ckpt;
    }

    void load(const Checkpoint& ckpt) {
        if (ckpt.params.size() != params_.size())
            throw DataError("checkpoint: parameter count mismatch");
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto& p = ckpt.params[i];
            auto& node = params_[i].second;
            if (p.name != params_[i].first || p.shape != node->val.shape)
                throw DataError("checkpoint: mismatch at parameter " + p.name);
            for (std::size_t j = 0; j < p.data.size(); ++j)
                node->val.v[j] = static_cast<T>(p.data[j]);
        }
    }

  private:
    void add_conv(const std::string& name, int co, int ci, Rng& rng, bool zero_init = false) {
        ad::Tensor<T> w({co, ci, 3, 3, 3});
        if (!zero_init) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(ci) * 27.0);
            for (auto& x : w.v) x = static_cast<T>(rng.uniform(-bound, bound));
        }
        ad::Tensor<T> b({co});
        params_.emplace_back(name + ".w", ad::make_leaf(std::move(w), true, name + ".w"));
        params_.emplace_back(name + ".b", ad::make_leaf(std::move(b), true, name + ".b"));
    }

    const ad::NodePtr<T>& param(const std::string& name) const {
        for (const auto& [n, node] : params_)
            if (n == name) return node;
        throw DataError("unknown parameter: " + name);
    }

    void check_input(const ad::Tensor<T>& t) const {
        if (!t.is_spatial() || t.channels() != 1)
            throw DataError("forward: inputs must be {1,D,H,W} tensors");
        const int div = 1 << (cfg_.levels - 1);
        for (int d : {t.nz(), t.ny(), t.nx()})
            if (d % div != 0)
                throw DataError("forward: dims must be divisible by " + std::to_string(div) +
                                " for " + std::to_string(cfg_.levels) +
                                " levels; pad to the next multiple of " + std::to_string(div));
    }

    // shared-weight encoder applied to one stream; returns features coarse
    // (level 1) to fine (level L)
    std::vector<ad::NodePtr<T>> encode(ad::Tape<T>& tape, const ad::NodePtr<T>& img) const {
        const int L = cfg_.levels;
        std::vector<ad::NodePtr<T>> fine_to_coarse;
        auto f = ad::leaky_relu(tape, ad::conv3d(tape, img, param("enc0.w"), param("enc0.b"), 1));
        fine_to_coarse.push_back(f);
        for (int i = 1; i < L; ++i) {
            f = ad::leaky_relu(tape, ad::conv3d(tape, f, param("enc" + std::to_string(i) + ".w"),
                                                param("enc" + std::to_string(i) + ".b"), 2));
            fine_to_coarse.push_back(f);
        }
        std::vector<ad::NodePtr<T>> coarse_to_fine(fine_to_coarse.rbegin(), fine_to_coarse.rend());
        return coarse_to_fine;
    }

    ForwardResult forward_pyramid(ad::Tape<T>& tape, const ad::NodePtr<T>& f0,
                                  const ad::NodePtr<T>& f1) const {
        const int L = cfg_.levels;
        const bool svf_mode = cfg_.parameterization == Parameterization::svf;
        const auto feats0 = encode(tape, f0);
        const auto feats1 = encode(tape, f1);

        ForwardResult result;
        ad::NodePtr<T> carried;  // v^(l-1) or phi^(l-1) at level l-1 resolution
        for (int l = 1; l <= L; ++l) {
            ad::NodePtr<T> up;       // upsampled carried field at level l resolution
            ad::NodePtr<T> phi_prev;  // deformation used for feature warping
            if (carried) {
                up = ad::scale(tape, ad::upsample2x(tape, carried), 2.0);
                phi_prev = svf_mode ? ad::expmap(tape, up, cfg_.exp_steps) : up;
                result.level_deformations.push_back(phi_prev);
            }

            auto feat1 = feats1[static_cast<std::size_t>(l - 1)];
            if (phi_prev && cfg_.deformation_placement == Placement::pre)
                feat1 = ad::warp_channels(tape, feat1, phi_prev);

            const auto [hs, hd] = ad::hadamard(tape, feats0[static_cast<std::size_t>(l - 1)], feat1);
            auto h = ad::concat_channels(tape, {hs, hd});
            const std::string base = "flow" + std::to_string(l);
            auto mid = ad::leaky_relu(
                tape, ad::conv3d(tape, h, param(base + ".conv1.w"), param(base + ".conv1.b"), 1));
            auto res = ad::conv3d(tape, mid, param(base + ".conv2.w"), param(base + ".conv2.b"), 1);
            if (phi_prev && cfg_.deformation_placement == Placement::post)
                res = ad::warp_channels(tape, res, phi_prev);

            if (!carried) {
                carried = res;
            } else if (cfg_.propagation == Propagation::svf_sum ||
                       (cfg_.propagation == Propagation::svf_bchd &&
                        cfg_.bchd.truncation_order == 1)) {
                carried = ad::add(tape, up, res);
            } else if (cfg_.propagation == Propagation::svf_bchd) {
                carried = ad::bchd(tape, up, res, cfg_.bchd.truncation_order);
            } else if (cfg_.propagation == Propagation::addition) {
                carried = ad::add(tape, up, res);
            } else {  // composition
                carried = ad::compose_fields(tape, up, res);
            }
            result.level_fields.push_back(carried);
        }

        if (svf_mode) {
            result.svf = carried;
            result.phi = ad::expmap(tape, carried, cfg_.exp_steps);
        } else {
            result.phi = carried;
        }
        return result;
    }

    ForwardResult forward_unet(ad::Tape<T>& tape, const ad::NodePtr<T>& f0,
                               const ad::NodePtr<T>& f1) const {
        const int L = cfg_.levels;
        std::vector<ad::NodePtr<T>> enc;
        auto f = ad::leaky_relu(tape,
                                ad::conv3d(tape, ad::concat_channels(tape, {f0, f1}),
                                           param("enc0.w"), param("enc0.b"), 1));
        enc.push_back(f);
        for (int i = 1; i < L; ++i) {
            f = ad::leaky_relu(tape, ad::conv3d(tape, f, param("enc" + std::to_string(i) + ".w"),
                                                param("enc" + std::to_string(i) + ".b"), 2));
            enc.push_back(f);
        }
        auto d = enc.back();
        for (int i = L - 2; i >= 0; --i) {
            auto cat = ad::concat_channels(tape, {ad::upsample2x(tape, d), enc[static_cast<std::size_t>(i)]});
            const std::string name = "dec" + std::to_string(i);
            d = ad::leaky_relu(tape,
                               ad::conv3d(tape, cat, param(name + ".w"), param(name + ".b"), 1));
        }
        ForwardResult result;
        result.phi = ad::conv3d(tape, d, param("flowhead.w"), param("flowhead.b"), 1);
        result.level_fields.push_back(result.phi);
        return result;
    }

    NetConfig cfg_;
    std::vector<std::pair<std::string, ad::NodePtr<T>>> params_;
};

}  // namespace svf
