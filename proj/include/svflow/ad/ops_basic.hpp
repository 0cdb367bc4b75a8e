#pragma once

#include <cmath>

#include "svflow/ad/tensor.hpp"

namespace svf::ad {

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape != b.shape) throw DataError(std::string(what) + ": shape mismatch");
}

}  // namespace detail

template <typename T>
NodePtr<T> add(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->val, b->val, "add");
    auto out = make_leaf(Tensor<T>(a->val.shape));
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] + b->val.v[i];
    if (tape.should_record({a, b}))
        tape.record(out, {a, b}, [out, a, b] {
            const auto& g = out->grad.v;
            if (a->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a->grad.v[i] += g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) b->grad.v[i] += g[i];
        });
    return out;
}

template <typename T>
NodePtr<T> sub(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->val, b->val, "sub");
    auto out = make_leaf(Tensor<T>(a->val.shape));
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] - b->val.v[i];
    if (tape.should_record({a, b}))
        tape.record(out, {a, b}, [out, a, b] {
            const auto& g = out->grad.v;
            if (a->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a->grad.v[i] += g[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) b->grad.v[i] -= g[i];
        });
    return out;
}

template <typename T>
NodePtr<T> mul(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->val, b->val, "mul");
    auto out = make_leaf(Tensor<T>(a->val.shape));
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] * b->val.v[i];
    if (tape.should_record({a, b}))
        tape.record(out, {a, b}, [out, a, b] {
            const auto& g = out->grad.v;
            if (a->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a->grad.v[i] += g[i] * b->val.v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) b->grad.v[i] += g[i] * a->val.v[i];
        });
    return out;
}

template <typename T>
NodePtr<T> divide(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& b) {
    detail::require_same_shape(a->val, b->val, "divide");
    auto out = make_leaf(Tensor<T>(a->val.shape));
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] / b->val.v[i];
    if (tape.should_record({a, b}))
        tape.record(out, {a, b}, [out, a, b] {
            const auto& g = out->grad.v;
            if (a->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a->grad.v[i] += g[i] / b->val.v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i)
                    b->grad.v[i] -= g[i] * out->val.v[i] / b->val.v[i];
        });
    return out;
}

template <typename T>
NodePtr<T> sqrt_elem(Tape<T>& tape, const NodePtr<T>& a) {
    auto out = make_leaf(Tensor<T>(a->val.shape));
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = std::sqrt(a->val.v[i]);
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a] {
            for (std::size_t i = 0; i < out->grad.v.size(); ++i)
                a->grad.v[i] += out->grad.v[i] * T(0.5) / out->val.v[i];
        });
    return out;
}

template <typename T>
NodePtr<T> scale(Tape<T>& tape, const NodePtr<T>& a, double c) {
    auto out = make_leaf(Tensor<T>(a->val.shape));
    const T cc = static_cast<T>(c);
    for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = cc * a->val.v[i];
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a, cc] {
            for (std::size_t i = 0; i < out->grad.v.size(); ++i)
                a->grad.v[i] += cc * out->grad.v[i];
        });
    return out;
}

template <typename T>
NodePtr<T> leaky_relu(Tape<T>& tape, const NodePtr<T>& a, double slope = 0.2) {
    auto out = make_leaf(Tensor<T>(a->val.shape));
    const T s = static_cast<T>(slope);
    for (std::size_t i = 0; i < out->val.v.size(); ++i) {
        const T x = a->val.v[i];
        out->val.v[i] = x > T(0) ? x : s * x;
    }
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a, s] {
            for (std::size_t i = 0; i < out->grad.v.size(); ++i)
                a->grad.v[i] += out->grad.v[i] * (a->val.v[i] > T(0) ? T(1) : s);
        });
    return out;
}

template <typename T>
NodePtr<T> sum(Tape<T>& tape, const NodePtr<T>& a) {
    T acc = T(0);
    for (const T x : a->val.v) acc += x;
    auto out = make_leaf(Tensor<T>::scalar(acc));
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a] {
            const T g = out->grad.v[0];
            for (std::size_t i = 0; i < a->grad.v.size(); ++i) a->grad.v[i] += g;
        });
    return out;
}

template <typename T>
NodePtr<T> mean(Tape<T>& tape, const NodePtr<T>& a) {
    const T inv = T(1) / static_cast<T>(a->val.size());
    T acc = T(0);
    for (const T x : a->val.v) acc += x;
    auto out = make_leaf(Tensor<T>::scalar(acc * inv));
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a, inv] {
            const T g = out->grad.v[0] * inv;
            for (std::size_t i = 0; i < a->grad.v.size(); ++i) a->grad.v[i] += g;
        });
    return out;
}

// a[i] - s[0], with s a scalar node
template <typename T>
NodePtr<T> sub_broadcast(Tape<T>& tape, const NodePtr<T>& a, const NodePtr<T>& s) {
    if (s->val.size() != 1) throw DataError("sub_broadcast: second argument must be scalar");
    auto out = make_leaf(Tensor<T>(a->val.shape));
    const T sv = s->val.v[0];
    for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = a->val.v[i] - sv;
    if (tape.should_record({a, s}))
        tape.record(out, {a, s}, [out, a, s] {
            const auto& g = out->grad.v;
            if (a->requires_grad)
                for (std::size_t i = 0; i < g.size(); ++i) a->grad.v[i] += g[i];
            if (s->requires_grad) {
                T acc = T(0);
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
                s->grad.v[0] -= acc;
            }
        });
    return out;
}

template <typename T>
NodePtr<T> concat_channels(Tape<T>& tape, const std::vector<NodePtr<T>>& parts) {
    if (parts.empty()) throw DataError("concat_channels: empty input");
    const auto& first = parts.front()->val;
    if (!first.is_spatial()) throw DataError("concat_channels: expects 4-D tensors");
    int channels = 0;
    for (const auto& p : parts) {
        if (!p->val.is_spatial() || p->val.nz() != first.nz() || p->val.ny() != first.ny() ||
            p->val.nx() != first.nx())
            throw DataError("concat_channels: spatial shape mismatch");
        channels += p->val.channels();
    }
    auto out = make_leaf(Tensor<T>({channels, first.nz(), first.ny(), first.nx()}));
    const std::size_t vol = static_cast<std::size_t>(first.volume());
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p->val.v.begin(), p->val.v.end(), out->val.v.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += static_cast<std::size_t>(p->val.channels()) * vol;
    }
    bool wants = false;
    for (const auto& p : parts)
        if (p->requires_grad) wants = true;
    if (tape.recording && wants) {
        std::vector<NodePtr<T>> inputs = parts;
        tape.record(out, inputs, [out, inputs, vol] {
            std::size_t off = 0;
            for (const auto& p : inputs) {
                const std::size_t n = static_cast<std::size_t>(p->val.channels()) * vol;
                if (p->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) p->grad.v[i] += out->grad.v[off + i];
                off += n;
            }
        });
    }
    return out;
}

template <typename T>
NodePtr<T> slice_channels(Tape<T>& tape, const NodePtr<T>& a, int begin, int count) {
    if (!a->val.is_spatial()) throw DataError("slice_channels: expects 4-D tensors");
    if (begin < 0 || count < 1 || begin + count > a->val.channels())
        throw DataError("slice_channels: range out of bounds");
    const std::size_t vol = static_cast<std::size_t>(a->val.volume());
    auto out = make_leaf(Tensor<T>({count, a->val.nz(), a->val.ny(), a->val.nx()}));
    const std::size_t off = static_cast<std::size_t>(begin) * vol;
    std::copy(a->val.v.begin() + static_cast<std::ptrdiff_t>(off),
              a->val.v.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(count) * vol),
              out->val.v.begin());
    if (tape.should_record({a}))
        tape.record(out, {a}, [out, a, off] {
            for (std::size_t i = 0; i < out->grad.v.size(); ++i) a->grad.v[off + i] += out->grad.v[i];
        });
    return out;
}

}  // namespace svf::ad
