#include "nvgan/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nvgan/errors.hpp"

namespace nvgan {

namespace {

std::array<uint32_t, 256> make_crc_table() {
    std::array<uint32_t, 256> table{};
    for (uint32_t i = 0; i < 256; ++i) {
        uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32_be(out, crc32(body.data(), body.size()));
}

uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

// zlib stream of stored (uncompressed) deflate blocks.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> out;
    out.push_back(0x78);
    out.push_back(0x01);
    size_t offset = 0;
    constexpr size_t kBlock = 65535;
    do {
        const size_t n = std::min(kBlock, raw.size() - offset);
        const bool final = offset + n == raw.size();
        out.push_back(final ? 1 : 0);
        out.push_back(static_cast<uint8_t>(n & 0xff));
        out.push_back(static_cast<uint8_t>(n >> 8));
        out.push_back(static_cast<uint8_t>(~n & 0xff));
        out.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
        out.insert(out.end(), raw.begin() + static_cast<long>(offset),
                   raw.begin() + static_cast<long>(offset + n));
        offset += n;
    } while (offset < raw.size());
    const uint32_t checksum = adler32(raw.data(), raw.size());
    put_u32_be(out, checksum);
    return out;
}

}  // namespace

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc) {
    static const std::array<uint32_t, 256> table = make_crc_table();
    uint32_t c = crc ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.rows < 1 || image.cols < 1 ||
        image.rgb.size() != static_cast<size_t>(image.rows * image.cols * 3)) {
        throw DataError("write_png: malformed image buffer");
    }
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(image.rows * (image.cols * 3 + 1)));
    for (int64_t r = 0; r < image.rows; ++r) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = image.rgb.data() + r * image.cols * 3;
        raw.insert(raw.end(), row, row + image.cols * 3);
    }

    std::vector<uint8_t> png = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(image.cols));
    put_u32_be(ihdr, static_cast<uint32_t>(image.rows));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", zlib_store(raw));
    append_chunk(png, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_png: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<long>(png.size()));
    if (!out) throw DataError("write_png: short write to " + path.string());
}

Image grid_to_grayscale(const Grid& plane, float lo, float hi) {
    const Grid* src = &plane;
    Grid squeezed;
    if (plane.rank() == 3 && plane.shape[0] == 1) {
        squeezed = Grid({plane.shape[1], plane.shape[2]}, plane.data);
        src = &squeezed;
    }
    require_rank(*src, 2, "grid_to_grayscale");
    Image img(src->shape[0], src->shape[1]);
    const float range = hi - lo;
    for (int64_t r = 0; r < img.rows; ++r) {
        for (int64_t c = 0; c < img.cols; ++c) {
            float v = ((*src)[r * img.cols + c] - lo) / (range != 0.0f ? range : 1.0f);
            v = std::clamp(v, 0.0f, 1.0f);
            const auto byte = static_cast<uint8_t>(std::round(v * 255.0f));
            img.at(r, c, 0) = byte;
            img.at(r, c, 1) = byte;
            img.at(r, c, 2) = byte;
        }
    }
    return img;
}

Image vstack(const std::vector<Image>& rows, int64_t gap) {
    if (rows.empty()) throw DataError("vstack: no images");
    const int64_t cols = rows.front().cols;
    int64_t total = 0;
    for (const auto& img : rows) {
        if (img.cols != cols) throw ShapeError("vstack: column counts differ");
        total += img.rows;
    }
    total += gap * static_cast<int64_t>(rows.size() - 1);
    Image out(total, cols);
    int64_t at = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const Image& img = rows[i];
        std::memcpy(out.rgb.data() + at * cols * 3, img.rgb.data(), img.rgb.size());
        at += img.rows + (i + 1 < rows.size() ? gap : 0);
    }
    return out;
}

Image crop(const Image& img, int64_t row0, int64_t row1, int64_t col0, int64_t col1) {
    if (row0 < 0 || col0 < 0 || row1 > img.rows || col1 > img.cols || row0 >= row1 ||
        col0 >= col1) {
        throw ShapeError("crop: region outside image");
    }
    Image out(row1 - row0, col1 - col0);
    for (int64_t r = 0; r < out.rows; ++r) {
        std::memcpy(out.rgb.data() + r * out.cols * 3,
                    img.rgb.data() + ((r + row0) * img.cols + col0) * 3,
                    static_cast<size_t>(out.cols * 3));
    }
    return out;
}

}  // namespace nvgan
