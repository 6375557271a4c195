#include "nvgan/grid.hpp"

#include <sstream>

namespace nvgan {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool shape_equal(const Shape& a, const Shape& b) { return a == b; }

static void validate_shape(const Shape& s, size_t data_len) {
    if (s.empty()) throw ShapeError("grid shape must have at least one extent");
    for (int64_t e : s) {
        if (e < 1) throw ShapeError("grid extents must be >= 1, got " + shape_to_string(s));
    }
    if (shape_numel(s) != static_cast<int64_t>(data_len)) {
        throw ShapeError("grid data length " + std::to_string(data_len) +
                         " does not match shape " + shape_to_string(s));
    }
}

Grid::Grid(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    validate_shape(shape, data.size());
}

Grid::Grid(Shape s) : shape(std::move(s)) {
    if (shape.empty()) throw ShapeError("grid shape must have at least one extent");
    for (int64_t e : shape) {
        if (e < 1) throw ShapeError("grid extents must be >= 1, got " + shape_to_string(shape));
    }
    data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Grid Grid::full(Shape s, float value) {
    Grid g(std::move(s));
    for (float& x : g.data) x = value;
    return g;
}

Grid Grid::scalar(float value) { return Grid({1}, {value}); }

void require_rank(const Grid& g, int64_t rank, const char* what) {
    if (g.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " grid, got " + shape_to_string(g.shape));
    }
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!shape_equal(a.shape, b.shape)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape) +
                         " vs " + shape_to_string(b.shape));
    }
}

}  // namespace nvgan
