#include "bcp/image.hpp"

#include "bcp/errors.hpp"
#include "bcp/parallel.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace bcp {

namespace {

void validate_geometry(int width, int height, int channels) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("image dimensions must be at least 1x1");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("image must have 1 or 3 channels");
}

} // namespace

RasterImage::RasterImage(int width, int height, int channels, Eigen::ArrayXd data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate_geometry(width, height, channels);
    const Eigen::Index expected = static_cast<Eigen::Index>(width) * height * channels;
    if (data_.size() != expected)
        throw std::invalid_argument("image data length does not match dimensions");
    if (!((data_ >= 0.0).all() && (data_ <= 1.0).all()))
        throw std::invalid_argument("image samples must lie in [0, 1]");
}

RasterImage RasterImage::constant(int width, int height, int channels, double value) {
    validate_geometry(width, height, channels);
    return {width, height, channels,
            Eigen::ArrayXd::Constant(static_cast<Eigen::Index>(width) * height * channels, value)};
}

// ---------------------------------------------------------------------------
// PNG via libpng
// ---------------------------------------------------------------------------

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RasterImage load_png(const std::string& path, std::FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_byte> rowbuf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG: " + path);
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("zero-dimension image: " + path);
    }

    // Normalize the decode to 8- or 16-bit gray/RGB samples.
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel layout: " + path);
    }

    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    const Eigen::Index pixels = static_cast<Eigen::Index>(width) * height;
    Eigen::ArrayXd data(pixels * channels);

    const size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::vector<png_byte>> rows(height, std::vector<png_byte>(rowbytes));
    std::vector<png_bytep> row_ptrs(height);
    for (png_uint_32 r = 0; r < height; ++r) row_ptrs[r] = rows[r].data();
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    for (png_uint_32 r = 0; r < height; ++r) {
        const png_byte* row = rows[r].data();
        for (png_uint_32 c = 0; c < width; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                double v;
                if (bit_depth == 16) {
                    const size_t o = 2 * (static_cast<size_t>(c) * channels + ch);
                    v = static_cast<double>((row[o] << 8) | row[o + 1]); // PNG is big-endian
                } else {
                    v = static_cast<double>(row[static_cast<size_t>(c) * channels + ch]);
                }
                data[ch * pixels + static_cast<Eigen::Index>(r) * width + c] = v / maxval;
            }
        }
    }
    return {static_cast<int>(width), static_cast<int>(height), channels, std::move(data)};
}

// ---------------------------------------------------------------------------
// Binary PGM (P5) / PPM (P6)
// ---------------------------------------------------------------------------

int pnm_read_value(std::FILE* fp, const std::string& path) {
    // Skips whitespace and '#' comments, then reads one decimal value.
    int ch = std::fgetc(fp);
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = std::fgetc(fp);
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = std::fgetc(fp);
    }
    if (ch == EOF || !std::isdigit(ch)) throw IoError("malformed PNM header: " + path);
    long value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1 << 30) throw IoError("malformed PNM header: " + path);
        ch = std::fgetc(fp);
    }
    return static_cast<int>(value);
}

RasterImage load_pnm(const std::string& path, std::FILE* fp, int channels) {
    const int width = pnm_read_value(fp, path);
    const int height = pnm_read_value(fp, path);
    const int maxval = pnm_read_value(fp, path);
    if (width < 1 || height < 1) throw IoError("zero-dimension image: " + path);
    if (maxval < 1 || maxval > 65535) throw IoError("unsupported PNM maxval: " + path);
    // Header ends with exactly one whitespace byte (consumed by the reader above).

    const bool wide = maxval > 255;
    const Eigen::Index pixels = static_cast<Eigen::Index>(width) * height;
    const size_t nsamples = static_cast<size_t>(pixels) * channels;
    std::vector<unsigned char> raw(nsamples * (wide ? 2 : 1));
    if (std::fread(raw.data(), 1, raw.size(), fp) != raw.size())
        throw IoError("truncated PNM data: " + path);

    Eigen::ArrayXd data(pixels * channels);
    for (Eigen::Index p = 0; p < pixels; ++p) {
        for (int ch = 0; ch < channels; ++ch) {
            const size_t s = static_cast<size_t>(p) * channels + ch;
            double v;
            if (wide) {
                v = static_cast<double>((raw[2 * s] << 8) | raw[2 * s + 1]); // big-endian per PNM
            } else {
                v = static_cast<double>(raw[s]);
            }
            if (v > maxval) throw IoError("PNM sample exceeds maxval: " + path);
            data[ch * pixels + p] = v / maxval;
        }
    }
    return {width, height, channels, std::move(data)};
}

} // namespace

RasterImage load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open file: " + path);

    unsigned char magic[8] = {};
    const size_t got = std::fread(magic, 1, sizeof magic, fp.get());
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (got == 8 && std::memcmp(magic, png_sig, 8) == 0) {
        std::rewind(fp.get());
        return load_png(path, fp.get());
    }
    if (got >= 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) {
        std::fseek(fp.get(), 2, SEEK_SET);
        return load_pnm(path, fp.get(), magic[1] == '5' ? 1 : 3);
    }
    throw IoError("unsupported format (expected PNG, P5 PGM or P6 PPM): " + path);
}

void save_image(const RasterImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG: " + path);
    }

    const int width = img.width();
    const int height = img.height();
    const int channels = img.channels();
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const Eigen::Index pixels = img.pixel_count();
    std::vector<png_byte> row(static_cast<size_t>(width) * channels);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                double v = img.data()[ch * pixels + img.linear(r, c)];
                v = std::min(1.0, std::max(0.0, v));
                row[static_cast<size_t>(c) * channels + ch] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

RasterImage rgb_to_hsv_v(const RasterImage& img) {
    if (img.channels() != 3)
        throw std::invalid_argument("rgb_to_hsv_v expects a 3-channel image");
    const Eigen::Index pixels = img.pixel_count();
    Eigen::ArrayXd v = img.plane(0).max(img.plane(1)).max(img.plane(2));
    (void)pixels;
    return {img.width(), img.height(), 1, std::move(v)};
}

RasterImage resize_nearest(const RasterImage& img, int new_width, int new_height) {
    if (new_width < 1 || new_height < 1)
        throw std::invalid_argument("resize_nearest target must be at least 1x1");
    const int w = img.width(), h = img.height(), ch = img.channels();
    if (new_width == w && new_height == h) return img;

    const Eigen::Index src_pixels = img.pixel_count();
    const Eigen::Index dst_pixels = static_cast<Eigen::Index>(new_width) * new_height;
    Eigen::ArrayXd out(dst_pixels * ch);
    const double sr = static_cast<double>(h) / new_height;
    const double sc = static_cast<double>(w) / new_width;
    for (int r = 0; r < new_height; ++r) {
        const int src_r = std::min(h - 1, static_cast<int>((r + 0.5) * sr));
        for (int c = 0; c < new_width; ++c) {
            const int src_c = std::min(w - 1, static_cast<int>((c + 0.5) * sc));
            for (int k = 0; k < ch; ++k) {
                out[k * dst_pixels + static_cast<Eigen::Index>(r) * new_width + c] =
                    img.data()[k * src_pixels + img.linear(src_r, src_c)];
            }
        }
    }
    return {new_width, new_height, ch, std::move(out)};
}

} // namespace bcp
