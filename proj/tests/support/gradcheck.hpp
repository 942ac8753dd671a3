#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "caudalung/core/rng.hpp"
#include "caudalung/core/tensor.hpp"

namespace testsupport {

// Central-difference gradient check in double precision.
// loss_fn must rebuild the loss deterministically from the current
// parameter values. Returns the max relative error over probed entries.
inline double max_rel_grad_error(std::vector<caudalung::core::Tensor<double>> params,
                                 const std::function<caudalung::core::Tensor<double>()>& loss_fn,
                                 caudalung::core::Rng& rng, int n_probes, double h = 1e-5) {
    using caudalung::core::Tensor;
    Tensor<double> loss = loss_fn();
    for (auto& p : params) p.zero_grad();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (int probe = 0; probe < n_probes; ++probe) {
        const std::size_t pi = rng.next_u64() % params.size();
        auto& p = params[pi];
        const std::size_t ei = rng.next_u64() % p.size();
        const double orig = p.data()[ei];
        const double step = h * std::max(1.0, std::abs(orig));
        p.data()[ei] = orig + step;
        const double fp = loss_fn().item();
        p.data()[ei] = orig - step;
        const double fm = loss_fn().item();
        p.data()[ei] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double an = analytic[pi][ei];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

inline std::vector<double> random_vec(caudalung::core::Rng& rng, std::size_t n,
                                      double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

} // namespace testsupport
