#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "caudalung/core/errors.hpp"

namespace caudalung::core {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major n-d array. Plain data carrier for images, masks and
// latent grids; no autograd attached.
template <class T>
struct NdArray {
    Shape shape;
    std::vector<T> v;

    NdArray() = default;
    explicit NdArray(Shape s, T fill = T{})
        : shape(std::move(s)), v(shape_numel(shape), fill) {}
    NdArray(Shape s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != shape_numel(shape))
            throw ShapeMismatch("NdArray data size " + std::to_string(v.size()) +
                                " does not match shape " + shape_str(shape));
    }

    [[nodiscard]] std::size_t size() const { return v.size(); }
    [[nodiscard]] bool empty() const { return v.empty(); }
    [[nodiscard]] int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    [[nodiscard]] int ndims() const { return static_cast<int>(shape.size()); }

    // 2-d access (rows, cols)
    T& at(int r, int c) { return v[static_cast<std::size_t>(r) * shape[1] + c]; }
    const T& at(int r, int c) const { return v[static_cast<std::size_t>(r) * shape[1] + c]; }

    // 3-d access (slice, row, col)
    T& at(int z, int r, int c) {
        return v[(static_cast<std::size_t>(z) * shape[1] + r) * shape[2] + c];
    }
    const T& at(int z, int r, int c) const {
        return v[(static_cast<std::size_t>(z) * shape[1] + r) * shape[2] + c];
    }

    bool same_shape(const NdArray& o) const { return shape == o.shape; }
};

using ImageHU = NdArray<float>;   // Hounsfield units
using Image01 = NdArray<float>;   // normalized [0,1]
using MaskGrid = NdArray<std::uint8_t>;

inline void require_same_shape(const Shape& a, const Shape& b, const char* where) {
    if (a != b)
        throw ShapeMismatch(std::string(where) + ": " + shape_str(a) + " vs " + shape_str(b));
}

inline bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

} // namespace caudalung::core
