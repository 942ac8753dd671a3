#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "caudalung/core/errors.hpp"
#include "caudalung/core/grid.hpp"

namespace caudalung::core {

namespace detail {
inline thread_local bool no_grad_flag = false;
}

inline bool grad_enabled() { return !detail::no_grad_flag; }

// Scoped inference mode: ops built while active record no graph.
struct NoGradGuard {
    NoGradGuard() : prev_(detail::no_grad_flag) { detail::no_grad_flag = true; }
    ~NoGradGuard() { detail::no_grad_flag = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> v;   // values
    std::vector<T> g;   // gradient, sized lazily
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl<T>>> parents;
    std::function<void()> backward_fn;  // accumulates into parents' g

    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), T(0));
    }
};

// Reverse-mode autodiff tensor with shared-value semantics. Ops are free
// functions (see ops.hpp / nn/functional.hpp); each records a closure that
// scatters the output gradient back to its parents.
template <class T>
class Tensor {
public:
    using Impl = TensorImpl<T>;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Impl> p) : p_(std::move(p)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->v.assign(shape_numel(impl->shape), T(0));
        impl->requires_grad = requires_grad && grad_enabled();
        return Tensor(std::move(impl));
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        auto impl = std::make_shared<Impl>();
        impl->shape = std::move(shape);
        impl->v = std::move(data);
        if (impl->v.size() != shape_numel(impl->shape))
            throw ShapeMismatch("Tensor::from: data/shape mismatch " + shape_str(impl->shape));
        impl->requires_grad = requires_grad && grad_enabled();
        return Tensor(std::move(impl));
    }

    static Tensor scalar(T value) { return from({1}, {value}); }

    [[nodiscard]] bool defined() const { return static_cast<bool>(p_); }
    [[nodiscard]] const Shape& shape() const { return p_->shape; }
    [[nodiscard]] std::size_t size() const { return p_->v.size(); }
    [[nodiscard]] bool requires_grad() const { return p_->requires_grad; }

    std::vector<T>& data() { return p_->v; }
    const std::vector<T>& data() const { return p_->v; }
    std::vector<T>& grad() {
        p_->ensure_grad();
        return p_->g;
    }

    [[nodiscard]] T item() const {
        if (p_->v.size() != 1) throw ShapeMismatch("item() on non-scalar " + shape_str(p_->shape));
        return p_->v[0];
    }

    [[nodiscard]] NdArray<T> to_array() const { return NdArray<T>(p_->shape, p_->v); }

    [[nodiscard]] Tensor detach() const {
        auto impl = std::make_shared<Impl>();
        impl->shape = p_->shape;
        impl->v = p_->v;
        return Tensor(std::move(impl));
    }

    void zero_grad() { p_->g.assign(p_->v.size(), T(0)); }

    // Backpropagate from a scalar root.
    void backward() {
        if (p_->v.size() != 1) throw ShapeMismatch("backward() root must be scalar");
        std::vector<Impl*> topo;
        std::unordered_set<Impl*> seen;
        std::vector<std::pair<Impl*, std::size_t>> stack;
        stack.emplace_back(p_.get(), 0);
        seen.insert(p_.get());
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                Impl* parent = node->parents[idx].get();
                ++idx;
                if (parent->requires_grad && !seen.count(parent)) {
                    seen.insert(parent);
                    stack.emplace_back(parent, 0);
                }
            } else {
                topo.push_back(node);
                stack.pop_back();
            }
        }
        p_->ensure_grad();
        p_->g[0] = T(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            if ((*it)->backward_fn) (*it)->backward_fn();
        }
    }

    std::shared_ptr<Impl> impl() const { return p_; }
    Impl* raw() const { return p_.get(); }

private:
    std::shared_ptr<Impl> p_;
};

// Builds the result node of an op: wires parents and requires_grad, and
// only attaches the backward closure when a graph is actually wanted.
template <class T, class BackwardFactory>
Tensor<T> make_op_result(Shape shape, std::vector<T> values,
                         std::initializer_list<Tensor<T>> parents,
                         BackwardFactory&& make_backward) {
    Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(values));
    if (!grad_enabled()) return out;
    bool needs = false;
    for (const auto& p : parents) needs = needs || (p.defined() && p.requires_grad());
    if (!needs) return out;
    auto impl = out.impl();
    impl->requires_grad = true;
    for (const auto& p : parents)
        if (p.defined()) impl->parents.push_back(p.impl());
    impl->backward_fn = make_backward(impl.get());
    return out;
}

} // namespace caudalung::core
