#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "svflow/nets.hpp"
#include "svflow/phantom.hpp"

using namespace svf;
using ad::make_leaf;
using ad::NodePtr;
using ad::Tape;
using ad::Tensor;

namespace {

template <typename T>
Tensor<T> random_image(int n, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<T> t({1, n, n, n});
    for (auto& v : t.v) v = static_cast<T>(rng.uniform(0.0, 1.0));
    return t;
}

template <typename T>
NodePtr<T> find_param(RegistrationModel<T>& m, const std::string& name) {
    for (auto& [n, node] : m.parameters())
        if (n == name) return node;
    REQUIRE(false);
    return nullptr;
}

template <typename T>
void perturb(RegistrationModel<T>& m, std::uint64_t seed, double mag = 0.05) {
    Rng rng(seed);
    for (auto& [name, node] : m.parameters())
        for (auto& v : node->val.v) v += static_cast<T>(rng.uniform(-mag, mag));
}

std::vector<std::string> all_presets() {
    return {"unet",
            "flowunet-none",
            "flowunet-pre",
            "flowunet-post",
            "flowunet-none-composition",
            "flowunet-pre-composition",
            "flowunet-post-composition",
            "svf-sum",
            "svf-bchd"};
}

}  // namespace

TEST_CASE("zero-flow initialization yields the identity registration for every variant") {
    const auto f0 = random_image<float>(16, 1);
    const auto f1 = random_image<float>(16, 2);
    for (const auto& name : all_presets()) {
        CAPTURE(name);
        RegistrationModel<float> model(model_preset(name, 3, 4), 33);
        Tape<float> tape;
        tape.recording = false;
        const auto fwd = model.forward(tape, make_leaf(f0), make_leaf(f1));
        for (const float v : fwd.phi->val.v) CHECK(v == 0.0f);
        auto warped = ad::warp_channels(tape, make_leaf(f1), fwd.phi);
        CHECK(warped->val.v == f1.v);
    }
}

TEST_CASE("pyramid level shapes follow the config arithmetic") {
    RegistrationModel<float> model(model_preset("svf-bchd", 3, 8), 5);
    perturb(model, 77);
    Tape<float> tape;
    tape.recording = false;
    const auto fwd =
        model.forward(tape, make_leaf(random_image<float>(32, 3)), make_leaf(random_image<float>(32, 4)));
    REQUIRE(fwd.level_fields.size() == 3);
    CHECK(fwd.level_fields[0]->val.shape == std::vector<int>{3, 8, 8, 8});
    CHECK(fwd.level_fields[1]->val.shape == std::vector<int>{3, 16, 16, 16});
    CHECK(fwd.level_fields[2]->val.shape == std::vector<int>{3, 32, 32, 32});
    CHECK(fwd.phi->val.shape == std::vector<int>{3, 32, 32, 32});
    REQUIRE(fwd.svf);
    CHECK(fwd.svf->val.shape == std::vector<int>{3, 32, 32, 32});

    // encoder channel widths double per level: {Co,Ci,3,3,3}
    CHECK(find_param(model, "enc0.w")->val.shape == std::vector<int>{8, 1, 3, 3, 3});
    CHECK(find_param(model, "enc1.w")->val.shape == std::vector<int>{16, 8, 3, 3, 3});
    CHECK(find_param(model, "enc2.w")->val.shape == std::vector<int>{32, 16, 3, 3, 3});
}

TEST_CASE("unet baseline emits a full-resolution displacement") {
    RegistrationModel<float> model(model_preset("unet", 3, 4), 6);
    perturb(model, 78);
    Tape<float> tape;
    tape.recording = false;
    const auto fwd =
        model.forward(tape, make_leaf(random_image<float>(32, 5)), make_leaf(random_image<float>(32, 6)));
    CHECK(fwd.phi->val.shape == std::vector<int>{3, 32, 32, 32});
    CHECK(!fwd.svf);
}

TEST_CASE("indivisible dims are rejected with a padding hint") {
    RegistrationModel<float> model(model_preset("svf-sum", 3, 4), 7);
    Tape<float> tape;
    CHECK_THROWS_WITH_AS(
        model.forward(tape, make_leaf(random_image<float>(30, 7)), make_leaf(random_image<float>(30, 8))),
        doctest::Contains("divisible by 4"), DataError);
}

TEST_CASE("the shared encoder makes argument order the only asymmetry") {
    RegistrationModel<float> model(model_preset("svf-bchd", 2, 4), 8);
    perturb(model, 79);
    const auto fa = random_image<float>(16, 9);
    Tape<float> t1, t2;
    t1.recording = t2.recording = false;
    const auto out1 = model.forward(t1, make_leaf(fa), make_leaf(fa));
    const auto out2 = model.forward(t2, make_leaf(fa), make_leaf(fa));
    CHECK(out1.phi->val.v == out2.phi->val.v);
    // one encoder parameter set only
    int enc_convs = 0;
    for (const auto& [name, node] : model.parameters())
        if (name.rfind("enc", 0) == 0 && name.back() == 'w') ++enc_convs;
    CHECK(enc_convs == 2);  // enc0, enc1 for L=2
}

TEST_CASE("bchd truncation order 1 reproduces svf_sum bitwise") {
    NetConfig sum_cfg = model_preset("svf-sum", 3, 4);
    NetConfig bchd1_cfg = model_preset("svf-bchd", 3, 4);
    bchd1_cfg.bchd.truncation_order = 1;
    RegistrationModel<float> a(sum_cfg, 99);
    RegistrationModel<float> b(bchd1_cfg, 99);
    perturb(a, 100);
    perturb(b, 100);
    const auto f0 = random_image<float>(16, 10);
    const auto f1 = random_image<float>(16, 11);
    Tape<float> t1, t2;
    t1.recording = t2.recording = false;
    const auto out_a = a.forward(t1, make_leaf(f0), make_leaf(f1));
    const auto out_b = b.forward(t2, make_leaf(f0), make_leaf(f1));
    CHECK(out_a.phi->val.v == out_b.phi->val.v);
}

TEST_CASE("svf_sum equals svf_bchd when the carried field is zero") {
    // only the finest flow block emits a nonzero residual; the carried SVF
    // entering it is exactly zero, so zeta(0, w) == w == 0 + w
    NetConfig sum_cfg = model_preset("svf-sum", 2, 4);
    NetConfig bchd_cfg = model_preset("svf-bchd", 2, 4);
    RegistrationModel<float> a(sum_cfg, 101);
    RegistrationModel<float> b(bchd_cfg, 101);
    for (auto* m : {&a, &b}) {
        Rng rng(500);
        for (auto& [name, node] : m->parameters())
            if (name.rfind("flow2.conv2", 0) == 0)
                for (auto& v : node->val.v) v = static_cast<float>(rng.uniform(-0.05, 0.05));
    }
    const auto f0 = random_image<float>(16, 12);
    const auto f1 = random_image<float>(16, 13);
    Tape<float> t1, t2;
    t1.recording = t2.recording = false;
    CHECK(a.forward(t1, make_leaf(f0), make_leaf(f1)).phi->val.v ==
          b.forward(t2, make_leaf(f0), make_leaf(f1)).phi->val.v);
}

TEST_CASE("a single-level net is exp(psi_conv(H(f0, f1))) exactly") {
    NetConfig cfg = model_preset("svf-bchd", 1, 4);
    RegistrationModel<float> model(cfg, 102);
    perturb(model, 103);
    const auto f0 = random_image<float>(8, 14);
    const auto f1 = random_image<float>(8, 15);
    Tape<float> tape;
    tape.recording = false;
    const auto fwd = model.forward(tape, make_leaf(f0), make_leaf(f1));

    // manual chain from the same primitives
    auto n0 = make_leaf(f0);
    auto n1 = make_leaf(f1);
    auto enc = [&](const NodePtr<float>& x) {
        return ad::leaky_relu(tape, ad::conv3d(tape, x, find_param(model, "enc0.w"),
                                               find_param(model, "enc0.b"), 1));
    };
    auto [hs, hd] = ad::hadamard(tape, enc(n0), enc(n1));
    auto h = ad::concat_channels(tape, {hs, hd});
    auto mid = ad::leaky_relu(tape, ad::conv3d(tape, h, find_param(model, "flow1.conv1.w"),
                                               find_param(model, "flow1.conv1.b"), 1));
    auto res = ad::conv3d(tape, mid, find_param(model, "flow1.conv2.w"),
                          find_param(model, "flow1.conv2.b"), 1);
    auto phi = ad::expmap(tape, res, cfg.exp_steps);
    CHECK(fwd.phi->val.v == phi->val.v);
}

TEST_CASE("zeroing the finer flow blocks leaves the upsampled coarse field") {
    NetConfig cfg = model_preset("svf-sum", 3, 4);
    RegistrationModel<float> model(cfg, 104);
    perturb(model, 105);
    // silence levels 2 and 3
    for (auto& [name, node] : model.parameters())
        if (name.rfind("flow2.conv2", 0) == 0 || name.rfind("flow3.conv2", 0) == 0)
            for (auto& v : node->val.v) v = 0.0f;
    const auto f0 = random_image<float>(16, 16);
    const auto f1 = random_image<float>(16, 17);
    Tape<float> tape;
    tape.recording = false;
    const auto fwd = model.forward(tape, make_leaf(f0), make_leaf(f1));
    auto v1 = fwd.level_fields[0];
    auto up1 = ad::scale(tape, ad::upsample2x(tape, v1), 2.0);
    auto up2 = ad::scale(tape, ad::upsample2x(tape, up1), 2.0);
    auto phi = ad::expmap(tape, up2, cfg.exp_steps);
    CHECK(fwd.phi->val.v == phi->val.v);
}

TEST_CASE("deformation placement changes the wiring") {
    const auto f0 = random_image<float>(16, 18);
    const auto f1 = random_image<float>(16, 19);
    std::vector<std::vector<float>> outputs;
    for (const char* name : {"flowunet-none", "flowunet-pre", "flowunet-post"}) {
        RegistrationModel<float> model(model_preset(name, 3, 4), 106);
        perturb(model, 107, 0.08);
        Tape<float> tape;
        tape.recording = false;
        outputs.push_back(model.forward(tape, make_leaf(f0), make_leaf(f1)).phi->val.v);
    }
    CHECK(outputs[0] != outputs[1]);
    CHECK(outputs[0] != outputs[2]);
    CHECK(outputs[1] != outputs[2]);
}

TEST_CASE("checkpoint round trip restores the model bitwise") {
    namespace fs = std::filesystem;
    NetConfig cfg = model_preset("svf-bchd", 2, 4);
    RegistrationModel<float> model(cfg, 108);
    perturb(model, 109);
    TrainConfig tc;
    const fs::path p = fs::temp_directory_path() / "model_rt.svck";
    write_checkpoint(p, model.to_checkpoint(tc));

    const Checkpoint ck = read_checkpoint(p);
    const NetConfig cfg2 = net_config_from_entries(ck.config);
    CHECK(cfg2.propagation == Propagation::svf_bchd);
    RegistrationModel<float> fresh(cfg2, 0);
    fresh.load(ck);
    const auto f0 = random_image<float>(8, 20);
    const auto f1 = random_image<float>(8, 21);
    Tape<float> t1, t2;
    t1.recording = t2.recording = false;
    CHECK(model.forward(t1, make_leaf(f0), make_leaf(f1)).phi->val.v ==
          fresh.forward(t2, make_leaf(f0), make_leaf(f1)).phi->val.v);
}

TEST_CASE("whole-network gradient spot check against finite differences") {
    NetConfig cfg = model_preset("svf-bchd", 2, 4);
    RegistrationModel<double> model(cfg, 110);
    perturb(model, 111);
    // bias the flow away from zero so sample points sit between grid nodes,
    // clear of the trilinear kinks that would corrupt finite differences
    for (auto& [name, node] : model.parameters())
        if (name.find(".conv2.b") != std::string::npos)
            for (auto& v : node->val.v) v = 0.27;
    const auto f0 = random_image<double>(8, 22);
    const auto f1 = random_image<double>(8, 23);

    const auto loss_value = [&]() {
        Tape<double> tape;
        tape.recording = false;
        auto fwd = model.forward(tape, make_leaf(f0), make_leaf(f1));
        return ad::unsupervised_loss(tape, make_leaf(f0), make_leaf(f1), fwd.phi, 0.1, 1)
            ->val.v[0];
    };

    Tape<double> tape;
    auto fwd = model.forward(tape, make_leaf(f0), make_leaf(f1));
    auto loss = ad::unsupervised_loss(tape, make_leaf(f0), make_leaf(f1), fwd.phi, 0.1, 1);
    tape.backward(loss);

    Rng rng(112);
    double max_rel = 0.0;
    const double h = 1e-4;
    for (int probe = 0; probe < 20; ++probe) {
        auto& [name, node] = model.parameters()[rng.uniform_index(model.parameters().size())];
        const std::size_t i = rng.uniform_index(node->val.v.size());
        const double orig = node->val.v[i];
        node->val.v[i] = orig + h;
        const double lp = loss_value();
        node->val.v[i] = orig - h;
        const double lm = loss_value();
        node->val.v[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        node->ensure_grad();
        const double an = node->grad.v[i];
        const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-2);
}
