#include <gtest/gtest.h>

#include <cmath>

#include "caudalung/core/ops.hpp"
#include "caudalung/core/rng.hpp"
#include "caudalung/nn/functional.hpp"
#include "support/gradcheck.hpp"

using caudalung::core::NdArray;
using caudalung::core::Rng;
using caudalung::core::Tensor;
namespace cc = caudalung::core;
namespace cn = caudalung::nn;

namespace {

Tensor<double> randt(Rng& rng, cc::Shape shape, double scale = 1.0) {
    return Tensor<double>::from(shape, testsupport::random_vec(rng, cc::shape_numel(shape), scale),
                                /*requires_grad=*/true);
}

// Naive O(everything) convolution for cross-checking the GEMM path.
std::vector<double> conv_oracle(const std::vector<double>& x, int n, int ci, int h, int w,
                                const std::vector<double>& wt, int co, int k,
                                const std::vector<double>& b, int stride, int pad) {
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    std::vector<double> y(static_cast<std::size_t>(n) * co * ho * wo, 0.0);
    for (int in = 0; in < n; ++in)
        for (int oc = 0; oc < co; ++oc)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = b[oc];
                    for (int ic = 0; ic < ci; ++ic)
                        for (int ki = 0; ki < k; ++ki)
                            for (int kj = 0; kj < k; ++kj) {
                                const int iy = oy * stride + ki - pad;
                                const int ix = ox * stride + kj - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += wt[((static_cast<std::size_t>(oc) * ci + ic) * k + ki) * k + kj] *
                                       x[((static_cast<std::size_t>(in) * ci + ic) * h + iy) * w + ix];
                            }
                    y[((static_cast<std::size_t>(in) * co + oc) * ho + oy) * wo + ox] = acc;
                }
    return y;
}

} // namespace

TEST(Rng, DeterministicAndForkable) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng c(42);
    Rng f1 = c.fork("augment");
    Rng f2 = c.fork("augment");
    Rng f3 = c.fork("sample");
    EXPECT_EQ(f1.next_u64(), f2.next_u64());
    EXPECT_NE(f1.next_u64(), f3.next_u64());
}

TEST(Rng, NormalMoments) {
    Rng rng(7);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(Tensor, BasicsAndErrors) {
    auto t = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.size(), 6u);
    EXPECT_THROW((void)t.item(), caudalung::ShapeMismatch);
    EXPECT_THROW(Tensor<float>::from({2, 2}, {1.0f}), caudalung::ShapeMismatch);
    EXPECT_FLOAT_EQ(Tensor<float>::scalar(3.5f).item(), 3.5f);
}

TEST(Tensor, NoGradGuardSuppressesGraph) {
    Rng rng(1);
    auto a = randt(rng, {4});
    {
        cc::NoGradGuard guard;
        auto s = cc::sum(cc::silu(a));
        EXPECT_FALSE(s.requires_grad());
        EXPECT_TRUE(s.impl()->parents.empty());
    }
    auto s = cc::sum(cc::silu(a));
    EXPECT_TRUE(s.requires_grad());
}

TEST(Ops, ElementwiseGradients) {
    Rng rng(3);
    auto a = randt(rng, {3, 5});
    auto b = randt(rng, {3, 5});
    auto c = randt(rng, {3, 5});
    auto loss = [&]() {
        return cc::sum(cc::mul(cc::silu(cc::add(a, b)), cc::sigmoid(cc::sub(c, b))));
    };
    Rng probe(11);
    EXPECT_LT(testsupport::max_rel_grad_error({a, b, c}, loss, probe, 30), 1e-6);
}

TEST(Ops, ClampAndFloorGating) {
    auto x = Tensor<double>::from({3}, {-2.0, 0.5, 9.0}, true);
    auto y = cc::sum(cc::clamp(x, -1.0, 1.0));
    y.backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 1.0);
    EXPECT_DOUBLE_EQ(x.grad()[2], 0.0);

    auto z = Tensor<double>::from({2}, {0.1, 0.9}, true);
    auto f = cc::sum(cc::cmax(z, 0.25));
    EXPECT_NEAR(f.item(), 0.25 + 0.9, 1e-12);
    f.backward();
    EXPECT_DOUBLE_EQ(z.grad()[0], 0.0);
    EXPECT_DOUBLE_EQ(z.grad()[1], 1.0);
}

TEST(Ops, ConcatSliceExpand) {
    Rng rng(5);
    auto a = randt(rng, {2, 3, 2, 2});
    auto b = randt(rng, {2, 2, 2, 2});
    auto cat = cc::concat_channels<double>({a, b});
    ASSERT_EQ(cat.shape(), (cc::Shape{2, 5, 2, 2}));
    auto sl = cc::slice_channels(cat, 3, 5);
    for (std::size_t i = 0; i < sl.size(); ++i) EXPECT_DOUBLE_EQ(sl.data()[i], b.data()[i]);

    auto p = randt(rng, {4, 1, 1});
    auto loss = [&]() {
        auto e = cc::expand_batch(p, 3);
        auto cat2 = cc::concat_channels<double>({cc::slice_channels(e, 1, 3), e});
        return cc::sum(cc::silu(cat2));
    };
    Rng probe(13);
    EXPECT_LT(testsupport::max_rel_grad_error({p}, loss, probe, 8), 1e-6);
}

TEST(Conv, MatchesNaiveOracle) {
    Rng rng(17);
    for (const auto& [n, ci, h, w, co, k, stride, pad] :
         std::vector<std::tuple<int, int, int, int, int, int, int, int>>{
             {2, 3, 7, 6, 4, 3, 1, 1}, {1, 2, 8, 8, 5, 3, 2, 1}, {2, 4, 5, 5, 3, 1, 1, 0}}) {
        auto x = randt(rng, {n, ci, h, w});
        auto wt = randt(rng, {co, ci, k, k});
        auto b = randt(rng, {co});
        auto y = cn::conv2d(x, wt, b, stride, pad);
        auto expect = conv_oracle(x.data(), n, ci, h, w, wt.data(), co, k, b.data(), stride, pad);
        ASSERT_EQ(y.size(), expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            EXPECT_NEAR(y.data()[i], expect[i], 1e-10) << "case k=" << k << " i=" << i;
    }
}

TEST(Conv, GradientsMatchFiniteDifferences) {
    Rng rng(19);
    auto x = randt(rng, {2, 3, 6, 6});
    auto w1 = randt(rng, {4, 3, 3, 3}, 0.5);
    auto b1 = randt(rng, {4}, 0.1);
    auto w2 = randt(rng, {2, 4, 1, 1}, 0.5);
    auto b2 = randt(rng, {2}, 0.1);
    auto loss = [&]() {
        auto h1 = cc::silu(cn::conv2d(x, w1, b1, 2, 1));
        auto h2 = cn::conv2d(h1, w2, b2, 1, 0);
        return cc::sum(cc::mul(h2, h2));
    };
    Rng probe(23);
    EXPECT_LT(testsupport::max_rel_grad_error({x, w1, b1, w2, b2}, loss, probe, 40), 1e-5);
}

TEST(Conv, DepthwiseMatchesGroupedOracle) {
    Rng rng(29);
    const int n = 2, c = 3, h = 5, w = 6;
    auto x = randt(rng, {n, c, h, w});
    auto wt = randt(rng, {c, 1, 3, 3});
    auto b = randt(rng, {c});
    auto y = cn::depthwise_conv3x3(x, wt, b);
    // per-channel oracle via the dense conv oracle with 1 channel
    for (int ci = 0; ci < c; ++ci) {
        for (int in = 0; in < n; ++in) {
            std::vector<double> xc(static_cast<std::size_t>(h) * w);
            for (std::size_t i = 0; i < xc.size(); ++i)
                xc[i] = x.data()[(static_cast<std::size_t>(in) * c + ci) * h * w + i];
            std::vector<double> wc(wt.data().begin() + ci * 9, wt.data().begin() + (ci + 1) * 9);
            auto yc = conv_oracle(xc, 1, 1, h, w, wc, 1, 3, {b.data()[ci]}, 1, 1);
            for (std::size_t i = 0; i < yc.size(); ++i)
                EXPECT_NEAR(y.data()[(static_cast<std::size_t>(in) * c + ci) * h * w + i], yc[i],
                            1e-10);
        }
    }
    auto loss = [&]() { return cc::sum(cc::silu(cn::depthwise_conv3x3(x, wt, b))); };
    Rng probe(31);
    EXPECT_LT(testsupport::max_rel_grad_error({x, wt, b}, loss, probe, 30), 1e-5);
}

TEST(Conv, UpsampleNearestRoundTrip) {
    Rng rng(37);
    auto x = randt(rng, {1, 2, 3, 3});
    auto y = cn::upsample_nearest2(x);
    ASSERT_EQ(y.shape(), (cc::Shape{1, 2, 6, 6}));
    EXPECT_DOUBLE_EQ(y.data()[0], x.data()[0]);
    EXPECT_DOUBLE_EQ(y.data()[1], x.data()[0]);
    auto loss = [&]() { return cc::sum(cc::mul(cn::upsample_nearest2(x), cn::upsample_nearest2(x))); };
    Rng probe(41);
    EXPECT_LT(testsupport::max_rel_grad_error({x}, loss, probe, 10), 1e-6);
}

TEST(DistributionOps, KlClosedFormValues) {
    // KL(N(1,1) || N(0,1)) = 0.5 ; KL(N(0,4) || N(0,1)) = 0.8069 (0.5*(4 - 1 - ln 4))
    auto qm = Tensor<double>::from({2}, {1.0, 0.0});
    auto qls = Tensor<double>::from({2}, {0.0, std::log(2.0)});
    auto pm = Tensor<double>::from({2}, {0.0, 0.0});
    auto pls = Tensor<double>::from({2}, {0.0, 0.0});
    auto kl = cc::kl_elementwise(qm, qls, pm, pls);
    EXPECT_NEAR(kl.data()[0], 0.5, 1e-12);
    EXPECT_NEAR(kl.data()[1], 0.5 * (4.0 - 1.0 - std::log(4.0)), 1e-12);
}

TEST(DistributionOps, KlGradients) {
    Rng rng(43);
    auto qm = randt(rng, {8});
    auto qls = randt(rng, {8}, 0.3);
    auto pm = randt(rng, {8});
    auto pls = randt(rng, {8}, 0.3);
    auto loss = [&]() { return cc::sum(cc::kl_elementwise(qm, qls, pm, pls)); };
    Rng probe(47);
    EXPECT_LT(testsupport::max_rel_grad_error({qm, qls, pm, pls}, loss, probe, 32), 1e-5);
}

TEST(DistributionOps, BceAndGaussianNll) {
    Rng rng(53);
    auto logits = randt(rng, {2, 1, 3, 3});
    NdArray<double> target({2, 1, 3, 3});
    for (auto& t : target.v) t = (rng.uniform() < 0.5) ? 0.0 : 1.0;
    auto b = cc::bce_with_logits_sum(logits, target);
    double expect = 0.0;
    for (std::size_t i = 0; i < target.v.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-logits.data()[i]));
        expect += -(target.v[i] * std::log(p) + (1.0 - target.v[i]) * std::log(1.0 - p));
    }
    EXPECT_NEAR(b.item(), expect, 1e-9);
    auto loss_b = [&]() { return cc::bce_with_logits_sum(logits, target); };
    Rng probe(59);
    EXPECT_LT(testsupport::max_rel_grad_error({logits}, loss_b, probe, 18), 1e-5);

    auto mu = randt(rng, {2, 1, 3, 3}, 0.5);
    auto lv = Tensor<double>::from({1}, {-0.7}, true);
    NdArray<double> x({2, 1, 3, 3});
    for (auto& xv : x.v) xv = rng.uniform();
    auto g = cc::gaussian_nll_sum(x, mu, lv);
    double gexpect = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double d = x.v[i] - mu.data()[i];
        gexpect += 0.5 * (d * d * std::exp(0.7) - 0.7 + std::log(2.0 * 3.14159265358979323846));
    }
    EXPECT_NEAR(g.item(), gexpect, 1e-9);
    auto loss_g = [&]() { return cc::gaussian_nll_sum(x, mu, lv); };
    EXPECT_LT(testsupport::max_rel_grad_error({mu, lv}, loss_g, probe, 19), 1e-5);
}

TEST(DistributionOps, ReparamSampleGradients) {
    Rng rng(61);
    auto mean = randt(rng, {4});
    auto ls = randt(rng, {4}, 0.3);
    std::vector<double> eps = testsupport::random_vec(rng, 4);
    auto loss = [&]() {
        auto z = cc::reparam_sample(mean, ls, eps, 0.8);
        return cc::sum(cc::mul(z, z));
    };
    Rng probe(67);
    EXPECT_LT(testsupport::max_rel_grad_error({mean, ls}, loss, probe, 8), 1e-6);
    // temperature 0 returns the mean bit-exactly
    auto z0 = cc::reparam_sample(mean, ls, eps, 0.0);
    for (std::size_t i = 0; i < z0.size(); ++i) EXPECT_EQ(z0.data()[i], mean.data()[i]);
}
