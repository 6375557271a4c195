#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvgan/errors.hpp"

namespace nvgan {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
bool shape_equal(const Shape& a, const Shape& b);

// Dense N-D array of 32-bit floats in row-major order. The universal carrier
// for channels, batches, activations and gradients.
struct Grid {
    Shape shape;
    std::vector<float> data;

    Grid() = default;
    Grid(Shape s, std::vector<float> d);
    explicit Grid(Shape s);  // zero-filled

    static Grid full(Shape s, float value);
    static Grid scalar(float value);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int64_t rank() const { return static_cast<int64_t>(shape.size()); }
    int64_t extent(int64_t axis) const { return shape[static_cast<size_t>(axis)]; }
    bool is_scalar() const { return data.size() == 1; }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 4-D accessors for the common BxCxHxW layout.
    float& at4(int64_t b, int64_t c, int64_t h, int64_t w) {
        return data[static_cast<size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    float at4(int64_t b, int64_t c, int64_t h, int64_t w) const {
        return data[static_cast<size_t>(((b * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
};

// Throws ShapeError unless the grid is a valid 4-D BxCxHxW array.
void require_rank(const Grid& g, int64_t rank, const char* what);
void require_same_shape(const Grid& a, const Grid& b, const char* what);

}  // namespace nvgan
