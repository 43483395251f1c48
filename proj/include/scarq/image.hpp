#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "scarq/error.hpp"

namespace scarq {

/// Row-major 2D grid with in-plane pixel spacing in mm.
template <typename T>
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<T> data;
    double dx = 1.0;
    double dy = 1.0;

    Image2D() = default;
    Image2D(int w, int h, T fill = T{}, double sx = 1.0, double sy = 1.0)
        : width(w), height(h), data(checked_size(w, h), fill), dx(sx), dy(sy) {}
    Image2D(int w, int h, std::vector<T> values, double sx = 1.0, double sy = 1.0)
        : width(w), height(h), data(std::move(values)), dx(sx), dy(sy) {
        if (data.size() != checked_size(w, h)) {
            throw DimensionError("Image2D: data length does not match width*height");
        }
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) { return data[index(x, y)]; }
    const T& operator()(int x, int y) const { return data[index(x, y)]; }

    /// Value at (x, y), or `outside` when the coordinate falls off the grid.
    T get_or(int x, int y, T outside) const { return contains(x, y) ? (*this)(x, y) : outside; }

    template <typename U>
    bool same_shape(const Image2D<U>& other) const {
        return width == other.width && height == other.height;
    }

    bool operator==(const Image2D&) const = default;

private:
    static std::size_t checked_size(int w, int h) {
        if (w < 0 || h < 0) throw InvalidArgument("Image2D: negative size");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
};

/// Intensity slice.
using Slice2D = Image2D<double>;
/// Binary mask, values 0 or 1.
using Mask2D = Image2D<std::uint8_t>;
/// Class-label slice, values in {0,1,2,3}.
using LabelSlice = Image2D<std::uint8_t>;

template <typename U, typename T>
void require_same_shape(const Image2D<T>& a, const Image2D<U>& b, const char* what) {
    if (!a.same_shape(b)) throw DimensionError(what);
}

inline std::size_t count_nonzero(const Mask2D& mask) {
    std::size_t n = 0;
    for (auto v : mask.data) n += v != 0;
    return n;
}

/// Mask of pixels whose label is `cls`.
inline Mask2D class_mask(const LabelSlice& labels, std::uint8_t cls) {
    Mask2D out(labels.width, labels.height, 0, labels.dx, labels.dy);
    for (std::size_t i = 0; i < labels.size(); ++i) out.data[i] = labels.data[i] == cls;
    return out;
}

}  // namespace scarq
