#pragma once

#include <functional>
#include <string>
#include <vector>

#include "svflow/ad/ops_basic.hpp"
#include "svflow/rng.hpp"

namespace svf::ad {

struct GradCheckReport {
    bool pass = true;
    double max_rel_err = 0.0;
    std::vector<double> per_input;
};

// Compares reverse-mode gradients of a scalar projection of the op output
// against central finite differences (64-bit mode). `build` constructs the op
// output from leaf nodes; the projection weights are fixed by `seed`.
inline GradCheckReport grad_check(
    const std::function<NodePtr<double>(Tape<double>&, const std::vector<NodePtr<double>>&)>& build,
    const std::vector<Tensor<double>>& inputs, double tol, double h = 1e-4,
    std::uint64_t seed = 0xC0FFEE) {
    // analytic pass
    Tape<double> tape;
    std::vector<NodePtr<double>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(make_leaf(t, true));
    auto out = build(tape, leaves);

    Tensor<double> proj(out->val.shape);
    Rng rng(seed);
    for (auto& p : proj.v) p = rng.uniform(-1.0, 1.0);
    auto loss = sum(tape, mul(tape, out, make_leaf(proj)));
    tape.backward(loss);

    std::vector<Tensor<double>> analytic;
    for (auto& leaf : leaves) {
        leaf->ensure_grad();
        analytic.push_back(leaf->grad);
    }

    const auto eval = [&](const std::vector<Tensor<double>>& vals) {
        Tape<double> t2;
        t2.recording = false;
        std::vector<NodePtr<double>> l2;
        for (const auto& v : vals) l2.push_back(make_leaf(v, false));
        auto o2 = build(t2, l2);
        double acc = 0.0;
        for (std::size_t i = 0; i < o2->val.v.size(); ++i) acc += o2->val.v[i] * proj.v[i];
        return acc;
    };

    GradCheckReport report;
    std::vector<Tensor<double>> vals = inputs;
    for (std::size_t which = 0; which < inputs.size(); ++which) {
        double max_a = 0.0, max_f = 0.0, max_diff = 0.0;
        for (std::size_t i = 0; i < vals[which].v.size(); ++i) {
            const double orig = vals[which].v[i];
            vals[which].v[i] = orig + h;
            const double lp = eval(vals);
            vals[which].v[i] = orig - h;
            const double lm = eval(vals);
            vals[which].v[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[which].v[i];
            max_a = std::max(max_a, std::fabs(an));
            max_f = std::max(max_f, std::fabs(fd));
            max_diff = std::max(max_diff, std::fabs(an - fd));
        }
        const double rel = max_diff / std::max({max_a, max_f, 1e-4});
        report.per_input.push_back(rel);
        report.max_rel_err = std::max(report.max_rel_err, rel);
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace svf::ad
