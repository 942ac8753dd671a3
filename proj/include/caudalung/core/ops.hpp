#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "caudalung/core/tensor.hpp"

// Elementwise, reduction and distribution ops on autograd tensors.
// Shapes are NCHW where spatial structure matters; reductions accumulate
// in double regardless of the scalar type.

namespace caudalung::core {

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    std::vector<T> out(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_op_result<T>(a.shape(), std::move(out), {a, b}, [&](TensorImpl<T>* self) {
        auto* pa = a.raw(); auto* pb = b.raw();
        return [self, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pa->g[i] += self->g[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pb->g[i] += self->g[i];
            }
        };
    });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a.shape(), b.shape(), "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op_result<T>(a.shape(), std::move(out), {a, b}, [&](TensorImpl<T>* self) {
        auto* pa = a.raw(); auto* pb = b.raw();
        return [self, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pa->g[i] += self->g[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pb->g[i] -= self->g[i];
            }
        };
    });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op_result<T>(a.shape(), std::move(out), {a, b}, [&](TensorImpl<T>* self) {
        auto* pa = a.raw(); auto* pb = b.raw();
        return [self, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pa->g[i] += self->g[i] * pb->v[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pb->g[i] += self->g[i] * pa->v[i];
            }
        };
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return make_op_result<T>(a.shape(), std::move(out), {a}, [&](TensorImpl<T>* self) {
        auto* pa = a.raw();
        return [self, pa, c]() {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i) pa->g[i] += self->g[i] * c;
        };
    });
}

template <class T>
Tensor<T> add_n(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw InvalidArgument("add_n: empty operand list");
    std::vector<T> out(xs[0].size(), T(0));
    for (const auto& x : xs) {
        require_same_shape(x.shape(), xs[0].shape(), "add_n");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += x.data()[i];
    }
    Tensor<T> result = Tensor<T>::from(xs[0].shape(), std::move(out));
    if (!grad_enabled()) return result;
    bool needs = false;
    for (const auto& x : xs) needs = needs || x.requires_grad();
    if (!needs) return result;
    auto impl = result.impl();
    impl->requires_grad = true;
    for (const auto& x : xs) impl->parents.push_back(x.impl());
    auto* self = impl.get();
    impl->backward_fn = [self]() {
        for (auto& parent : self->parents) {
            if (!parent->requires_grad) continue;
            parent->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i) parent->g[i] += self->g[i];
        }
    };
    return result;
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x.data()[i];
        out[i] = v / (T(1) + std::exp(-v));
    }
    return make_op_result<T>(x.shape(), std::move(out), {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i) {
                const T v = px->v[i];
                const T s = T(1) / (T(1) + std::exp(-v));
                px->g[i] += self->g[i] * (s * (T(1) + v * (T(1) - s)));
            }
        };
    });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
    return make_op_result<T>(x.shape(), std::move(out), {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i) {
                const T s = self->v[i];
                px->g[i] += self->g[i] * s * (T(1) - s);
            }
        };
    });
}

// Hard clamp; gradient passes through where the input lies inside [lo, hi].
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x.data()[i];
        out[i] = v < lo ? lo : (v > hi ? hi : v);
    }
    return make_op_result<T>(x.shape(), std::move(out), {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px, lo, hi]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i) {
                const T v = px->v[i];
                if (v >= lo && v <= hi) px->g[i] += self->g[i];
            }
        };
    });
}

// max(x, c) against a constant floor; gradient flows only above the floor.
template <class T>
Tensor<T> cmax(const Tensor<T>& x, T c) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.data()[i], c);
    return make_op_result<T>(x.shape(), std::move(out), {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px, c]() {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->g.size(); ++i)
                if (px->v[i] > c) px->g[i] += self->g[i];
        };
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    double acc = 0.0;
    for (const T v : x.data()) acc += static_cast<double>(v);
    return make_op_result<T>({1}, {static_cast<T>(acc)}, {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px]() {
            px->ensure_grad();
            const T go = self->g[0];
            for (auto& gi : px->g) gi += go;
        };
    });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(x.size())));
}

// ---- NCHW channel plumbing -------------------------------------------------

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw InvalidArgument("concat_channels: empty list");
    const Shape& s0 = xs[0].shape();
    if (s0.size() != 4) throw ShapeMismatch("concat_channels expects NCHW");
    int ctotal = 0;
    for (const auto& x : xs) {
        const Shape& s = x.shape();
        if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
            throw ShapeMismatch("concat_channels: incompatible " + shape_str(s));
        ctotal += s[1];
    }
    const int n = s0[0], h = s0[2], w = s0[3];
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::vector<T> out(static_cast<std::size_t>(n) * ctotal * hw);
    std::vector<int> offsets;
    int coff = 0;
    for (const auto& x : xs) {
        offsets.push_back(coff);
        const int c = x.shape()[1];
        for (int in = 0; in < n; ++in) {
            const T* src = x.data().data() + static_cast<std::size_t>(in) * c * hw;
            T* dst = out.data() + (static_cast<std::size_t>(in) * ctotal + coff) * hw;
            std::copy(src, src + static_cast<std::size_t>(c) * hw, dst);
        }
        coff += c;
    }
    Tensor<T> result = Tensor<T>::from({n, ctotal, h, w}, std::move(out));
    if (!grad_enabled()) return result;
    bool needs = false;
    for (const auto& x : xs) needs = needs || x.requires_grad();
    if (!needs) return result;
    auto impl = result.impl();
    impl->requires_grad = true;
    for (const auto& x : xs) impl->parents.push_back(x.impl());
    auto* self = impl.get();
    impl->backward_fn = [self, n, ctotal, hw, offsets]() {
        for (std::size_t pi = 0; pi < self->parents.size(); ++pi) {
            auto& parent = self->parents[pi];
            if (!parent->requires_grad) continue;
            parent->ensure_grad();
            const int c = parent->shape[1];
            for (int in = 0; in < n; ++in) {
                const T* src = self->g.data() + (static_cast<std::size_t>(in) * ctotal + offsets[pi]) * hw;
                T* dst = parent->g.data() + static_cast<std::size_t>(in) * c * hw;
                for (std::size_t i = 0; i < static_cast<std::size_t>(c) * hw; ++i) dst[i] += src[i];
            }
        }
    };
    return result;
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int c0, int c1) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeMismatch("slice_channels expects NCHW");
    if (c0 < 0 || c1 > s[1] || c0 >= c1) throw InvalidArgument("slice_channels: bad range");
    const int n = s[0], c = s[1], h = s[2], w = s[3], cs = c1 - c0;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::vector<T> out(static_cast<std::size_t>(n) * cs * hw);
    for (int in = 0; in < n; ++in) {
        const T* src = x.data().data() + (static_cast<std::size_t>(in) * c + c0) * hw;
        T* dst = out.data() + static_cast<std::size_t>(in) * cs * hw;
        std::copy(src, src + static_cast<std::size_t>(cs) * hw, dst);
    }
    return make_op_result<T>({n, cs, h, w}, std::move(out), {x}, [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px, n, c, cs, c0, hw]() {
            px->ensure_grad();
            for (int in = 0; in < n; ++in) {
                const T* src = self->g.data() + static_cast<std::size_t>(in) * cs * hw;
                T* dst = px->g.data() + (static_cast<std::size_t>(in) * c + c0) * hw;
                for (std::size_t i = 0; i < static_cast<std::size_t>(cs) * hw; ++i) dst[i] += src[i];
            }
        };
    });
}

// Repeat a [C,H,W] parameter across the batch dimension.
template <class T>
Tensor<T> expand_batch(const Tensor<T>& param, int n) {
    const Shape& s = param.shape();
    if (s.size() != 3) throw ShapeMismatch("expand_batch expects CHW");
    const std::size_t chw = param.size();
    std::vector<T> out(static_cast<std::size_t>(n) * chw);
    for (int in = 0; in < n; ++in)
        std::copy(param.data().begin(), param.data().end(), out.begin() + in * chw);
    return make_op_result<T>({n, s[0], s[1], s[2]}, std::move(out), {param},
                             [&](TensorImpl<T>* self) {
        auto* pp = param.raw();
        return [self, pp, n, chw]() {
            pp->ensure_grad();
            for (int in = 0; in < n; ++in)
                for (std::size_t i = 0; i < chw; ++i) pp->g[i] += self->g[in * chw + i];
        };
    });
}

// ---- distribution ops -------------------------------------------------------

// mean + temperature * exp(log_std) * eps with eps held fixed.
template <class T>
Tensor<T> reparam_sample(const Tensor<T>& mean, const Tensor<T>& log_std,
                         const std::vector<T>& eps, T temperature) {
    require_same_shape(mean.shape(), log_std.shape(), "reparam_sample");
    if (eps.size() != mean.size()) throw ShapeMismatch("reparam_sample: eps size");
    std::vector<T> out(mean.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mean.data()[i] + temperature * std::exp(log_std.data()[i]) * eps[i];
    return make_op_result<T>(mean.shape(), std::move(out), {mean, log_std},
                             [&](TensorImpl<T>* self) {
        auto* pm = mean.raw(); auto* pls = log_std.raw();
        auto eps_copy = eps;
        return [self, pm, pls, eps_copy, temperature]() {
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i) pm->g[i] += self->g[i];
            }
            if (pls->requires_grad) {
                pls->ensure_grad();
                for (std::size_t i = 0; i < self->g.size(); ++i)
                    pls->g[i] += self->g[i] * temperature * std::exp(pls->v[i]) * eps_copy[i];
            }
        };
    });
}

// Elementwise KL( N(qm, e^qls) || N(pm, e^pls) ) for diagonal Gaussians.
template <class T>
Tensor<T> kl_elementwise(const Tensor<T>& qm, const Tensor<T>& qls,
                         const Tensor<T>& pm, const Tensor<T>& pls) {
    require_same_shape(qm.shape(), qls.shape(), "kl_elementwise");
    require_same_shape(qm.shape(), pm.shape(), "kl_elementwise");
    require_same_shape(qm.shape(), pls.shape(), "kl_elementwise");
    std::vector<T> out(qm.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T dm = qm.data()[i] - pm.data()[i];
        const T r2 = std::exp(T(2) * (qls.data()[i] - pls.data()[i]));
        out[i] = pls.data()[i] - qls.data()[i] +
                 (r2 + dm * dm * std::exp(T(-2) * pls.data()[i])) * T(0.5) - T(0.5);
    }
    return make_op_result<T>(qm.shape(), std::move(out), {qm, qls, pm, pls},
                             [&](TensorImpl<T>* self) {
        auto* a = qm.raw(); auto* b = qls.raw(); auto* c = pm.raw(); auto* d = pls.raw();
        return [self, a, b, c, d]() {
            for (std::size_t i = 0; i < self->g.size(); ++i) {
                const T go = self->g[i];
                if (go == T(0)) continue;
                const T dm = a->v[i] - c->v[i];
                const T ip2 = std::exp(T(-2) * d->v[i]);        // 1 / sigma_p^2
                const T q2 = std::exp(T(2) * b->v[i]);          // sigma_q^2
                if (a->requires_grad) { a->ensure_grad(); a->g[i] += go * dm * ip2; }
                if (c->requires_grad) { c->ensure_grad(); c->g[i] -= go * dm * ip2; }
                if (b->requires_grad) { b->ensure_grad(); b->g[i] += go * (q2 * ip2 - T(1)); }
                if (d->requires_grad) {
                    d->ensure_grad();
                    d->g[i] += go * (T(1) - (q2 + dm * dm) * ip2);
                }
            }
        };
    });
}

// Sum over elements of binary cross-entropy with logits against a fixed
// binary target. Numerically stable log1p form.
template <class T>
Tensor<T> bce_with_logits_sum(const Tensor<T>& logits, const NdArray<T>& target) {
    require_same_shape(logits.shape(), target.shape, "bce_with_logits_sum");
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = static_cast<double>(logits.data()[i]);
        const double t = static_cast<double>(target.v[i]);
        acc += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
    }
    return make_op_result<T>({1}, {static_cast<T>(acc)}, {logits}, [&](TensorImpl<T>* self) {
        auto* pl = logits.raw();
        auto tgt = target.v;
        return [self, pl, tgt]() {
            pl->ensure_grad();
            const T go = self->g[0];
            for (std::size_t i = 0; i < pl->v.size(); ++i) {
                const T s = T(1) / (T(1) + std::exp(-pl->v[i]));
                pl->g[i] += go * (s - tgt[i]);
            }
        };
    });
}

// Sum over elements of the Gaussian negative log-likelihood of fixed data x
// under mean mu and a single shared log-variance parameter.
template <class T>
Tensor<T> gaussian_nll_sum(const NdArray<T>& x, const Tensor<T>& mu, const Tensor<T>& log_var) {
    require_same_shape(mu.shape(), x.shape, "gaussian_nll_sum");
    if (log_var.size() != 1) throw ShapeMismatch("gaussian_nll_sum: log_var must be scalar");
    const double lv = static_cast<double>(log_var.data()[0]);
    const double inv_var = std::exp(-lv);
    constexpr double log2pi = 1.8378770664093453;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d = static_cast<double>(x.v[i]) - static_cast<double>(mu.data()[i]);
        acc += 0.5 * (d * d * inv_var + lv + log2pi);
    }
    return make_op_result<T>({1}, {static_cast<T>(acc)}, {mu, log_var},
                             [&](TensorImpl<T>* self) {
        auto* pm = mu.raw(); auto* plv = log_var.raw();
        auto xv = x.v;
        return [self, pm, plv, xv]() {
            const T go = self->g[0];
            const T inv = std::exp(-plv->v[0]);
            if (pm->requires_grad) {
                pm->ensure_grad();
                for (std::size_t i = 0; i < pm->v.size(); ++i)
                    pm->g[i] += go * (pm->v[i] - xv[i]) * inv;
            }
            if (plv->requires_grad) {
                plv->ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < pm->v.size(); ++i) {
                    const double d = static_cast<double>(xv[i]) - static_cast<double>(pm->v[i]);
                    acc += 0.5 * (1.0 - d * d * static_cast<double>(inv));
                }
                plv->g[0] += go * static_cast<T>(acc);
            }
        };
    });
}

} // namespace caudalung::core
