#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "zspacing/errors.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// ImageStack
// ---------------------------------------------------------------------------

// Ordered sequence of equally-sized 2D grayscale sections, stored row-major
// in (z, y, x) order.  Samples are either 8-bit unsigned or 32-bit float.
struct ImageStack {
    int width = 0;
    int height = 0;
    int depth = 0;
    double pixel_size_xy_nm = 1.0;
    double nominal_spacing_z_nm = 1.0;
    std::variant<std::vector<std::uint8_t>, std::vector<float>> data;

    [[nodiscard]] bool is_u8() const { return data.index() == 0; }

    [[nodiscard]] std::size_t section_pixels() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    [[nodiscard]] std::size_t total_pixels() const {
        return section_pixels() * static_cast<std::size_t>(depth);
    }

    [[nodiscard]] std::size_t sample_count() const {
        return is_u8() ? std::get<0>(data).size() : std::get<1>(data).size();
    }
};

// Checks the type invariants: positive plane dimensions, at least two
// sections, sample count matching the declared dimensions, and (for f32
// data) finiteness of every sample.
inline void validate_stack(const ImageStack& s) {
    if (s.width < 1 || s.height < 1)
        throw data_error("stack: width and height must be at least 1 (got " +
                         std::to_string(s.width) + "x" + std::to_string(s.height) + ")");
    if (s.depth < 2)
        throw data_error("stack: depth must be at least 2 (got " + std::to_string(s.depth) + ")");
    if (s.sample_count() != s.total_pixels())
        throw data_error("stack: data holds " + std::to_string(s.sample_count()) +
                         " samples but dimensions declare " + std::to_string(s.total_pixels()));
    if (!s.is_u8()) {
        const auto& v = std::get<1>(s.data);
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                throw data_error("stack: non-finite f32 sample at index " + std::to_string(i));
    }
}

// Read-only Eigen view of one full section.
template <class T>
[[nodiscard]] auto section_view(const ImageStack& s, int z) {
    using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const T* base = std::get<std::vector<T>>(s.data).data() +
                    static_cast<std::size_t>(z) * s.section_pixels();
    return Eigen::Map<const M>(base, s.height, s.width);
}

// ---------------------------------------------------------------------------
// Image
// ---------------------------------------------------------------------------

// Simple row-major 2D image used by the rendering operations.
template <class T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> pixels;  // row-major, pixels[y*width + x]

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

    [[nodiscard]] T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] const T& at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

using ImageU8 = Image<std::uint8_t>;

} // namespace zspacing
