#include "puseg/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "puseg/errors.hpp"

namespace puseg {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("libpng: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

/// Decodes to 8-bit gray, 1 byte per pixel.
Grid<std::uint8_t> decode_gray8(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw IoError("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp& p;
        png_infop& i;
        ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
    } guard{png, info};

    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);  // default ITU-R BT.709 luminance weights
    png_read_update_info(png, info);

    const int rows = static_cast<int>(png_get_image_height(png, info));
    const int cols = static_cast<int>(png_get_image_width(png, info));
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(cols))
        throw IoError("unsupported PNG layout in '" + path.string() + "'");
    Grid<std::uint8_t> out(rows, cols);
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) row_ptrs[r] = &out(r, 0);
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    return out;
}

void encode_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& img) {
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw IoError("libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp& p;
        png_infop& i;
        ~Guard() { png_destroy_write_struct(&p, &i); }
    } guard{png, info};

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols()), static_cast<png_uint_32>(img.rows()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < img.rows(); ++r) png_write_row(png, const_cast<png_bytep>(&img(r, 0)));
    png_write_end(png, nullptr);
}

}  // namespace

ImageF read_png(const std::filesystem::path& path) {
    const auto raw = decode_gray8(path);
    ImageF out(raw.shape());
    for (std::size_t i = 0; i < raw.size(); ++i) out.data()[i] = raw.data()[i] / 255.0;
    return out;
}

void write_png(const std::filesystem::path& path, const ImageF& image) {
    Grid<std::uint8_t> raw(image.shape());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw.data()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data()[i], 0.0, 1.0) * 255.0));
    encode_gray8(path, raw);
}

Mask read_mask_png(const std::filesystem::path& path) {
    auto raw = decode_gray8(path);
    for (auto& v : raw.values()) v = v ? 1 : 0;
    return raw;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    Grid<std::uint8_t> raw(mask.shape());
    for (std::size_t i = 0; i < raw.size(); ++i) raw.data()[i] = mask.data()[i] ? 255 : 0;
    encode_gray8(path, raw);
}

std::vector<PixelIndex> read_centerline_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    std::vector<PixelIndex> pts;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "row,col") continue;
        std::istringstream ss(line);
        PixelIndex p;
        char comma = 0;
        if (!(ss >> p.row >> comma >> p.col) || comma != ',')
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 'row,col'");
        pts.push_back(p);
    }
    return pts;
}

void write_centerline_csv(const std::filesystem::path& path, const std::vector<PixelIndex>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "row,col\n";
    for (const auto& p : points) out << p.row << ',' << p.col << '\n';
}

}  // namespace puseg
