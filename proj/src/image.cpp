#include "graft/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "graft/error.hpp"

namespace graft {

namespace {

uint8_t quantize(float v) {
    const float q = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
    return uint8_t(q);
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_impl(const std::string& path, const Image& img, int color_type, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png write failure: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(size_t(img.width) * size_t(channels));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < channels; ++c) row[size_t(x * channels + c)] = quantize(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_rgb8(const std::string& path, const Image& img) {
    if (img.channels != 3) throw ShapeError("write_png_rgb8 expects 3 channels");
    write_png_impl(path, img, PNG_COLOR_TYPE_RGB, 3);
}

void write_png_gray8(const std::string& path, const Image& img) {
    if (img.channels != 1) throw ShapeError("write_png_gray8 expects 1 channel");
    write_png_impl(path, img, PNG_COLOR_TYPE_GRAY, 1);
}

Image read_png_rgb8(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw NotFoundError("missing file: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt png: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    Image img(h, w, 3);
    std::vector<uint8_t> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = float(row[size_t(x * 3 + c)]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

Image resize(const Image& src, int out_h, int out_w, ResizeMode mode) {
    Image dst(out_h, out_w, src.channels);
    const bool area_y = mode == ResizeMode::kAreaAverage && out_h < src.height;
    const bool area_x = mode == ResizeMode::kAreaAverage && out_w < src.width;
    const double sy = double(src.height) / out_h;
    const double sx = double(src.width) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (int ox = 0; ox < out_w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                if (area_y || area_x) {
                    // box filter with fractional pixel coverage along the
                    // shrinking axes, point sample along growing axes
                    const int iy0 = area_y ? int(std::floor(y0)) : int(std::min(double(src.height - 1), std::floor(oy * sy + sy * 0.5)));
                    const int iy1 = area_y ? int(std::ceil(y1)) : iy0 + 1;
                    const int ix0 = area_x ? int(std::floor(x0)) : int(std::min(double(src.width - 1), std::floor(ox * sx + sx * 0.5)));
                    const int ix1 = area_x ? int(std::ceil(x1)) : ix0 + 1;
                    double wsum = 0.0;
                    for (int iy = iy0; iy < iy1; ++iy) {
                        if (iy < 0 || iy >= src.height) continue;
                        const double wy = area_y
                                              ? std::min(y1, double(iy + 1)) - std::max(y0, double(iy))
                                              : 1.0;
                        if (wy <= 0.0) continue;
                        for (int ix = ix0; ix < ix1; ++ix) {
                            if (ix < 0 || ix >= src.width) continue;
                            const double wx =
                                area_x ? std::min(x1, double(ix + 1)) - std::max(x0, double(ix))
                                       : 1.0;
                            if (wx <= 0.0) continue;
                            acc += double(src.at(iy, ix, c)) * wy * wx;
                            wsum += wy * wx;
                        }
                    }
                    acc = wsum > 0.0 ? acc / wsum : 0.0;
                } else {
                    const int iy = std::min(src.height - 1, int((oy + 0.5) * sy));
                    const int ix = std::min(src.width - 1, int((ox + 0.5) * sx));
                    acc = double(src.at(iy, ix, c));
                }
                dst.at(oy, ox, c) = float(acc);
            }
        }
    }
    return dst;
}

Image gaussian_blur(const Image& src, double sigma, int radius) {
    if (sigma <= 0.0 || radius <= 0) return src;
    std::vector<double> kernel(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[size_t(i + radius)];
    }
    for (auto& k : kernel) k /= sum;

    Image tmp(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = std::clamp(x + i, 0, src.width - 1);
                    acc += kernel[size_t(i + radius)] * double(src.at(y, xx, c));
                }
                tmp.at(y, x, c) = float(acc);
            }
    Image dst(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = std::clamp(y + i, 0, src.height - 1);
                    acc += kernel[size_t(i + radius)] * double(tmp.at(yy, x, c));
                }
                dst.at(y, x, c) = float(acc);
            }
    return dst;
}

Image flip_horizontal(const Image& src) {
    Image dst(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                dst.at(y, x, c) = src.at(y, src.width - 1 - x, c);
    return dst;
}

Image rotate_bilinear(const Image& src, double angle_rad) {
    Image dst(src.height, src.width, src.channels);
    const double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
    const double ca = std::cos(-angle_rad), sa = std::sin(-angle_rad);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double sx0 = std::clamp(cx + ca * dx - sa * dy, 0.0, double(src.width - 1));
            const double sy0 = std::clamp(cy + sa * dx + ca * dy, 0.0, double(src.height - 1));
            const int x0 = int(sx0), y0 = int(sy0);
            const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
            const double fx = sx0 - x0, fy = sy0 - y0;
            for (int c = 0; c < src.channels; ++c) {
                const double v = (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
                                 fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
                dst.at(y, x, c) = float(v);
            }
        }
    return dst;
}

Image adjust_brightness_contrast(const Image& src, float brightness, float contrast) {
    Image dst = src;
    for (auto& v : dst.data) v = std::clamp((v - 0.5f) * contrast + 0.5f + brightness, 0.0f, 1.0f);
    return dst;
}

}  // namespace graft
