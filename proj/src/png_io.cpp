#include "cellseg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "cellseg/errors.hpp"

namespace cellseg {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
    throw DataError(std::string(what) + ": " + path.string());
}

}  // namespace

ImageBuffer read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail(path, "cannot open PNG");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<png_byte> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "corrupt PNG");
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    png_byte color_type = png_get_color_type(png, info);
    png_byte bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "unsupported PNG channel layout");
    }

    std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * height);
    row_ptrs.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) row_ptrs[r] = raw.data() + r * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer out(static_cast<int>(height), static_cast<int>(width), channels);
    for (png_uint_32 r = 0; r < height; ++r) {
        const png_byte* row = raw.data() + r * rowbytes;
        for (png_uint_32 c = 0; c < width; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                out.at(static_cast<int>(r), static_cast<int>(c), ch) =
                    static_cast<float>(row[c * channels + ch]);
            }
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw DataError("write_png supports 1 or 3 channels, got " +
                        std::to_string(image.channels()) + ": " + path.string());
    }
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail(path, "cannot create PNG");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    std::vector<png_byte> raw;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "PNG write failed");
    }

    png_init_io(png, fp.get());
    int color_type = image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
                 static_cast<png_uint_32>(image.height()), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::size_t rowbytes = static_cast<std::size_t>(image.width()) * image.channels();
    raw.resize(rowbytes * image.height());
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            for (int ch = 0; ch < image.channels(); ++ch) {
                float v = std::round(image.at(r, c, ch));
                v = std::min(255.0f, std::max(0.0f, v));
                raw[r * rowbytes + c * image.channels() + ch] = static_cast<png_byte>(v);
            }
        }
    }
    row_ptrs.resize(image.height());
    for (int r = 0; r < image.height(); ++r) row_ptrs[r] = raw.data() + r * rowbytes;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace cellseg
