#pragma once

#include <Eigen/Dense>

#include "caudalung/core/ops.hpp"

// Convolution and resampling primitives. GEMM-heavy paths (general conv)
// go through im2col + Eigen; the column buffer is rebuilt in the backward
// pass instead of being stored in the graph.

namespace caudalung::nn {

using core::NdArray;
using core::Shape;
using core::shape_str;
using core::Tensor;
using core::TensorImpl;

namespace detail {

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
void im2col(const T* x, int c_in, int h, int w, int k, int stride, int pad,
            int ho, int wo, T* col) {
    const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* dst = col + (static_cast<std::size_t>((ci * k + ki) * k + kj)) * hw_out;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, T(0));
                        dst += wo;
                        continue;
                    }
                    const T* src_row = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        *dst++ = (ix >= 0 && ix < w) ? src_row[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* col, int c_in, int h, int w, int k, int stride, int pad,
                int ho, int wo, T* dx) {
    const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
    for (int ci = 0; ci < c_in; ++ci) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* src = col + (static_cast<std::size_t>((ci * k + ki) * k + kj)) * hw_out;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= h) {
                        src += wo;
                        continue;
                    }
                    T* dst_row = dx + (static_cast<std::size_t>(ci) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride + kj - pad;
                        if (ix >= 0 && ix < w) dst_row[ix] += src[ox];
                    }
                    src += wo;
                }
            }
        }
    }
}

} // namespace detail

// General 2-d convolution, square kernel. x: [N,Cin,H,W], w: [Cout,Cin,k,k],
// b: [Cout]. 1x1 kernels skip the column buffer entirely.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1, int pad = 0) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || ws[2] != ws[3])
        throw ShapeMismatch("conv2d: expects NCHW input and square OIHW weight");
    if (xs[1] != ws[1])
        throw ShapeMismatch("conv2d: channel mismatch " + shape_str(xs) + " vs " +
                                  shape_str(ws));
    const int n = xs[0], c_in = xs[1], h = xs[2], wdt = xs[3];
    const int c_out = ws[0], k = ws[2];
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (wdt + 2 * pad - k) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d: empty output");
    const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
    const int krows = c_in * k * k;

    std::vector<T> out(static_cast<std::size_t>(n) * c_out * hw_out);
    const bool is_1x1 = (k == 1 && stride == 1 && pad == 0);
    std::vector<T> col;
    if (!is_1x1) col.resize(static_cast<std::size_t>(krows) * hw_out);
    detail::ConstMatMap<T> wm(w.data().data(), c_out, krows);
    for (int in = 0; in < n; ++in) {
        const T* xin = x.data().data() + static_cast<std::size_t>(in) * c_in * h * wdt;
        detail::MatMap<T> ym(out.data() + static_cast<std::size_t>(in) * c_out * hw_out,
                             c_out, static_cast<Eigen::Index>(hw_out));
        if (is_1x1) {
            detail::ConstMatMap<T> xm(xin, c_in, static_cast<Eigen::Index>(hw_out));
            ym.noalias() = wm * xm;
        } else {
            detail::im2col(xin, c_in, h, wdt, k, stride, pad, ho, wo, col.data());
            detail::ConstMatMap<T> cm(col.data(), krows, static_cast<Eigen::Index>(hw_out));
            ym.noalias() = wm * cm;
        }
        for (int co = 0; co < c_out; ++co) {
            T* row = out.data() + (static_cast<std::size_t>(in) * c_out + co) * hw_out;
            const T bias = b.data()[co];
            for (std::size_t i = 0; i < hw_out; ++i) row[i] += bias;
        }
    }

    return core::make_op_result<T>({n, c_out, ho, wo}, std::move(out), {x, w, b},
                                   [&](TensorImpl<T>* self) {
        auto* px = x.raw(); auto* pw = w.raw(); auto* pb = b.raw();
        return [self, px, pw, pb, n, c_in, h, wdt, c_out, k, stride, pad, ho, wo, krows,
                hw_out, is_1x1]() {
            px->ensure_grad();
            pw->ensure_grad();
            pb->ensure_grad();
            std::vector<T> col_buf;
            std::vector<T> dcol_buf;
            if (!is_1x1) {
                col_buf.resize(static_cast<std::size_t>(krows) * hw_out);
                dcol_buf.resize(static_cast<std::size_t>(krows) * hw_out);
            }
            detail::ConstMatMap<T> wm(pw->v.data(), c_out, krows);
            detail::MatMap<T> dwm(pw->g.data(), c_out, krows);
            for (int in = 0; in < n; ++in) {
                const T* xin = px->v.data() + static_cast<std::size_t>(in) * c_in * h * wdt;
                T* dxin = px->g.data() + static_cast<std::size_t>(in) * c_in * h * wdt;
                detail::ConstMatMap<T> dym(
                    self->g.data() + static_cast<std::size_t>(in) * c_out * hw_out,
                    c_out, static_cast<Eigen::Index>(hw_out));
                for (int co = 0; co < c_out; ++co)
                    pb->g[co] += dym.row(co).sum();
                if (is_1x1) {
                    detail::ConstMatMap<T> xm(xin, c_in, static_cast<Eigen::Index>(hw_out));
                    dwm.noalias() += dym * xm.transpose();
                    detail::MatMap<T> dxm(dxin, c_in, static_cast<Eigen::Index>(hw_out));
                    dxm.noalias() += wm.transpose() * dym;
                } else {
                    detail::im2col(xin, c_in, h, wdt, k, stride, pad, ho, wo, col_buf.data());
                    detail::ConstMatMap<T> cm(col_buf.data(), krows,
                                              static_cast<Eigen::Index>(hw_out));
                    dwm.noalias() += dym * cm.transpose();
                    detail::MatMap<T> dcm(dcol_buf.data(), krows,
                                          static_cast<Eigen::Index>(hw_out));
                    dcm.noalias() = wm.transpose() * dym;
                    detail::col2im_add(dcol_buf.data(), c_in, h, wdt, k, stride, pad, ho, wo,
                                       dxin);
                }
            }
        };
    });
}

// Depthwise 3x3 convolution, stride 1, pad 1. w: [C,1,3,3], b: [C].
template <class T>
Tensor<T> depthwise_conv3x3(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4 || ws[1] != 1 || ws[2] != 3 || ws[3] != 3 ||
        ws[0] != xs[1])
        throw ShapeMismatch("depthwise_conv3x3: bad shapes");
    const int n = xs[0], c = xs[1], h = xs[2], wdt = xs[3];
    std::vector<T> out(x.size());
    for (int in = 0; in < n; ++in) {
        for (int ci = 0; ci < c; ++ci) {
            const T* xp = x.data().data() + (static_cast<std::size_t>(in) * c + ci) *
                                                static_cast<std::size_t>(h) * wdt;
            const T* wp = w.data().data() + static_cast<std::size_t>(ci) * 9;
            T* yp = out.data() + (static_cast<std::size_t>(in) * c + ci) *
                                     static_cast<std::size_t>(h) * wdt;
            const T bias = b.data()[ci];
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < wdt; ++j) {
                    T acc = bias;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int iy = i + ki - 1;
                        if (iy < 0 || iy >= h) continue;
                        for (int kj = 0; kj < 3; ++kj) {
                            const int ix = j + kj - 1;
                            if (ix < 0 || ix >= wdt) continue;
                            acc += wp[ki * 3 + kj] * xp[static_cast<std::size_t>(iy) * wdt + ix];
                        }
                    }
                    yp[static_cast<std::size_t>(i) * wdt + j] = acc;
                }
            }
        }
    }
    return core::make_op_result<T>(xs, std::move(out), {x, w, b}, [&](TensorImpl<T>* self) {
        auto* px = x.raw(); auto* pw = w.raw(); auto* pb = b.raw();
        return [self, px, pw, pb, n, c, h, wdt]() {
            px->ensure_grad();
            pw->ensure_grad();
            pb->ensure_grad();
            for (int in = 0; in < n; ++in) {
                for (int ci = 0; ci < c; ++ci) {
                    const std::size_t base = (static_cast<std::size_t>(in) * c + ci) *
                                             static_cast<std::size_t>(h) * wdt;
                    const T* xp = px->v.data() + base;
                    const T* gp = self->g.data() + base;
                    T* dxp = px->g.data() + base;
                    const T* wp = pw->v.data() + static_cast<std::size_t>(ci) * 9;
                    T* dwp = pw->g.data() + static_cast<std::size_t>(ci) * 9;
                    double db = 0.0;
                    for (int i = 0; i < h; ++i) {
                        for (int j = 0; j < wdt; ++j) {
                            const T go = gp[static_cast<std::size_t>(i) * wdt + j];
                            if (go == T(0)) continue;
                            db += static_cast<double>(go);
                            for (int ki = 0; ki < 3; ++ki) {
                                const int iy = i + ki - 1;
                                if (iy < 0 || iy >= h) continue;
                                for (int kj = 0; kj < 3; ++kj) {
                                    const int ix = j + kj - 1;
                                    if (ix < 0 || ix >= wdt) continue;
                                    const std::size_t xi = static_cast<std::size_t>(iy) * wdt + ix;
                                    dwp[ki * 3 + kj] += go * xp[xi];
                                    dxp[xi] += go * wp[ki * 3 + kj];
                                }
                            }
                        }
                    }
                    pb->g[ci] += static_cast<T>(db);
                }
            }
        };
    });
}

// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) throw ShapeMismatch("upsample_nearest2 expects NCHW");
    const int n = xs[0], c = xs[1], h = xs[2], w = xs[3];
    const int ho = h * 2, wo = w * 2;
    std::vector<T> out(static_cast<std::size_t>(n) * c * ho * wo);
    for (int nc = 0; nc < n * c; ++nc) {
        const T* src = x.data().data() + static_cast<std::size_t>(nc) * h * w;
        T* dst = out.data() + static_cast<std::size_t>(nc) * ho * wo;
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j)
                dst[static_cast<std::size_t>(i) * wo + j] =
                    src[static_cast<std::size_t>(i / 2) * w + j / 2];
    }
    return core::make_op_result<T>({n, c, ho, wo}, std::move(out), {x},
                                   [&](TensorImpl<T>* self) {
        auto* px = x.raw();
        return [self, px, n, c, h, w, ho, wo]() {
            px->ensure_grad();
            for (int nc = 0; nc < n * c; ++nc) {
                const T* gsrc = self->g.data() + static_cast<std::size_t>(nc) * ho * wo;
                T* gdst = px->g.data() + static_cast<std::size_t>(nc) * h * w;
                for (int i = 0; i < ho; ++i)
                    for (int j = 0; j < wo; ++j)
                        gdst[static_cast<std::size_t>(i / 2) * w + j / 2] +=
                            gsrc[static_cast<std::size_t>(i) * wo + j];
            }
        };
    });
}

} // namespace caudalung::nn
