#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nvgan/grid.hpp"

namespace nvgan {

// Interleaved 8-bit RGB raster.
struct Image {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<uint8_t> rgb;

    Image() = default;
    Image(int64_t r, int64_t c) : rows(r), cols(c), rgb(static_cast<size_t>(r * c * 3), 0) {}

    uint8_t& at(int64_t r, int64_t c, int64_t ch) {
        return rgb[static_cast<size_t>((r * cols + c) * 3 + ch)];
    }
    uint8_t at(int64_t r, int64_t c, int64_t ch) const {
        return rgb[static_cast<size_t>((r * cols + c) * 3 + ch)];
    }
};

// IEEE CRC-32, also used by the checkpoint format.
uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0);

// Deterministic PNG writer (stored deflate blocks, no external compressor).
void write_png(const std::filesystem::path& path, const Image& image);

// Renders a single-channel grid to grayscale RGB over [lo, hi].
Image grid_to_grayscale(const Grid& plane, float lo, float hi);

// Stacks images vertically with a separator line; widths must match.
Image vstack(const std::vector<Image>& rows, int64_t gap = 2);

Image crop(const Image& img, int64_t row0, int64_t row1, int64_t col0, int64_t col1);

}  // namespace nvgan
