#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "caudalung/core/errors.hpp"
#include "caudalung/core/grid.hpp"

namespace caudalung::eval {

using core::ImageHU;
using core::MaskGrid;

// Dice similarity coefficient, 2|A^B| / (|A|+|B|). Two empty masks count
// as a perfect match.
inline double dsc(const MaskGrid& a, const MaskGrid& b) {
    core::require_same_shape(a.shape, b.shape, "dsc");
    std::size_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const bool va = a.v[i] != 0, vb = b.v[i] != 0;
        na += va;
        nb += vb;
        ni += (va && vb);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

namespace detail {

// Boundary voxels: mask voxels with a 4-neighbour outside the mask (array
// edges count as outside).
inline std::vector<std::pair<int, int>> boundary_points(const MaskGrid& m) {
    const int h = m.dim(0), w = m.dim(1);
    std::vector<std::pair<int, int>> pts;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!m.at(r, c)) continue;
            const bool edge = r == 0 || r == h - 1 || c == 0 || c == w - 1 ||
                              !m.at(r - 1, c) || !m.at(r + 1, c) ||
                              !m.at(r, c - 1) || !m.at(r, c + 1);
            if (edge) pts.emplace_back(r, c);
        }
    }
    return pts;
}

inline std::vector<double> directed_distances(const std::vector<std::pair<int, int>>& from,
                                              const std::vector<std::pair<int, int>>& to,
                                              double sr, double sc) {
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto& [ar, ac] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [br, bc] : to) {
            const double dr = (ar - br) * sr;
            const double dc = (ac - bc) * sc;
            best = std::min(best, dr * dr + dc * dc);
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double idx = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

} // namespace detail

struct HausdorffResult {
    double hd_mm = 0.0;    // exact maximum
    double hd95_mm = 0.0;  // 95th percentile variant, supplementary
};

// Symmetric Hausdorff distance between mask boundaries, Euclidean in mm.
inline HausdorffResult hausdorff_full(const MaskGrid& a, const MaskGrid& b,
                                      double spacing_r, double spacing_c) {
    core::require_same_shape(a.shape, b.shape, "hausdorff");
    auto pa = detail::boundary_points(a);
    auto pb = detail::boundary_points(b);
    if (pa.empty() || pb.empty())
        throw EmptySet("hausdorff: both masks must be nonempty");
    auto dab = detail::directed_distances(pa, pb, spacing_r, spacing_c);
    auto dba = detail::directed_distances(pb, pa, spacing_r, spacing_c);
    HausdorffResult res;
    res.hd_mm = std::max(*std::max_element(dab.begin(), dab.end()),
                         *std::max_element(dba.begin(), dba.end()));
    res.hd95_mm = std::max(detail::percentile(dab, 0.95), detail::percentile(dba, 0.95));
    return res;
}

inline double hausdorff(const MaskGrid& a, const MaskGrid& b, double spacing_r,
                        double spacing_c) {
    return hausdorff_full(a, b, spacing_r, spacing_c).hd_mm;
}

inline double rmse_hu(const ImageHU& x, const ImageHU& x_hat) {
    core::require_same_shape(x.shape, x_hat.shape, "rmse_hu");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double d = static_cast<double>(x.v[i]) - static_cast<double>(x_hat.v[i]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.v.size()));
}

// HU values along one image row.
inline std::vector<float> hu_profile(const ImageHU& image, int row) {
    if (image.ndims() != 2) throw ShapeMismatch("hu_profile expects a 2-d grid");
    if (row < 0 || row >= image.dim(0))
        throw RowOutOfRange("row " + std::to_string(row) + " of " + std::to_string(image.dim(0)));
    std::vector<float> out(static_cast<std::size_t>(image.dim(1)));
    for (int c = 0; c < image.dim(1); ++c) out[static_cast<std::size_t>(c)] = image.at(row, c);
    return out;
}

// ---- small statistics helpers ----------------------------------------------

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
    MeanSd r;
    if (v.empty()) return r;
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - r.mean) * (x - r.mean);
    r.sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
    return r;
}

// Average ranks with tie handling.
inline std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("pearson: bad inputs");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

} // namespace caudalung::eval
