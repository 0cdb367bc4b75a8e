#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "svflow/errors.hpp"
#include "svflow/grid.hpp"

namespace svf::ad {

// Dense tensor over T in {float, double}. Spatial tensors are 4-D with shape
// {channels, nz, ny, nx} so row-major storage matches the x-fastest grid
// layout; scalars are shape {1}.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
        v.assign(static_cast<std::size_t>(count(shape)), T(0));
    }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DataError("tensor shape entries must be positive");
            n *= d;
        }
        return n;
    }

    static Tensor scalar(T value) {
        Tensor t({1});
        t.v[0] = value;
        return t;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

    bool is_spatial() const { return shape.size() == 4; }
    int channels() const { return shape[0]; }
    int nz() const { return shape[1]; }
    int ny() const { return shape[2]; }
    int nx() const { return shape[3]; }
    std::int64_t plane() const { return static_cast<std::int64_t>(ny()) * nx(); }
    std::int64_t volume() const { return static_cast<std::int64_t>(nz()) * ny() * nx(); }
};

template <typename T>
struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // allocated lazily by ensure_grad()
    bool requires_grad = false;
    std::string name;

    void ensure_grad() {
        if (grad.v.empty()) grad = Tensor<T>(val.shape);
    }
    void zero_grad() {
        if (!grad.v.empty()) std::fill(grad.v.begin(), grad.v.end(), T(0));
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> val, bool requires_grad = false, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(val);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

// Operation tape. Creation order is the topological order; backward walks it
// in reverse, running only records reachable from the loss. Ops create their
// output node, then record a closure that reads out->grad and accumulates
// into the grads of inputs with requires_grad set.
template <typename T>
class Tape {
  public:
    struct Record {
        NodePtr<T> out;
        std::vector<NodePtr<T>> inputs;
        std::function<void()> backward;
    };

    bool recording = true;

    bool should_record(std::initializer_list<NodePtr<T>> inputs) const {
        if (!recording) return false;
        for (const auto& in : inputs)
            if (in && in->requires_grad) return true;
        return false;
    }

    void record(NodePtr<T> out, std::vector<NodePtr<T>> inputs, std::function<void()> backward) {
        out->requires_grad = true;
        records_.push_back({std::move(out), std::move(inputs), std::move(backward)});
    }

    void backward(const NodePtr<T>& loss) {
        if (loss->val.size() != 1) throw NumericalError("backward: loss must be scalar");
        if (!loss->requires_grad) return;  // loss independent of all parameters
        loss->ensure_grad();
        loss->grad.v[0] = T(1);
        std::unordered_set<const Node<T>*> needed;
        needed.insert(loss.get());
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            if (!needed.count(it->out.get())) continue;
            for (const auto& in : it->inputs)
                if (in->requires_grad) {
                    in->ensure_grad();
                    needed.insert(in.get());
                }
            it->backward();
        }
    }

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

  private:
    std::vector<Record> records_;
};

// conversions between grid containers and tensors

template <typename T>
Tensor<T> tensor_from_volume(const ScalarVolume& vol) {
    Tensor<T> t({1, vol.geometry.dims[2], vol.geometry.dims[1], vol.geometry.dims[0]});
    for (std::size_t i = 0; i < vol.data.size(); ++i) t.v[i] = static_cast<T>(vol.data[i]);
    return t;
}

template <typename T>
Tensor<T> tensor_from_field(const VectorField& f) {
    Tensor<T> t({3, f.geometry.dims[2], f.geometry.dims[1], f.geometry.dims[0]});
    const std::size_t n = f.geometry.voxel_count();
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i) t.v[static_cast<std::size_t>(c) * n + i] =
            static_cast<T>(f.comp[c][i]);
    return t;
}

template <typename T>
ScalarVolume volume_from_tensor(const Tensor<T>& t, const GridGeometry& g) {
    if (!t.is_spatial() || t.channels() != 1 || t.volume() != static_cast<std::int64_t>(g.voxel_count()))
        throw DataError("volume_from_tensor: shape mismatch");
    ScalarVolume vol(g);
    for (std::size_t i = 0; i < vol.data.size(); ++i) vol.data[i] = static_cast<double>(t.v[i]);
    return vol;
}

template <typename T>
VectorField field_from_tensor(const Tensor<T>& t, const GridGeometry& g,
                              FieldKind kind = FieldKind::displacement) {
    if (!t.is_spatial() || t.channels() != 3 || t.volume() != static_cast<std::int64_t>(g.voxel_count()))
        throw DataError("field_from_tensor: shape mismatch");
    VectorField f(g, kind);
    const std::size_t n = g.voxel_count();
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < n; ++i)
            f.comp[c][i] = static_cast<double>(t.v[static_cast<std::size_t>(c) * n + i]);
    return f;
}

}  // namespace svf::ad
