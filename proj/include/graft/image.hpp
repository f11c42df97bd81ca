#ifndef GRAFT_IMAGE_HPP
#define GRAFT_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace graft {

// Minimal planar-free float image: H x W x C interleaved, row-major.
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c) : width(w), height(h), channels(c), data(size_t(h) * w * c, 0.f) {}

    float at(int y, int x, int c) const { return data[size_t((y * width + x) * channels + c)]; }
    float& at(int y, int x, int c) { return data[size_t((y * width + x) * channels + c)]; }
};

// 8-bit RGB png io. Values quantized with round(v * 255), clamped.
void write_png_rgb8(const std::string& path, const Image& img);
Image read_png_rgb8(const std::string& path);

// Grayscale helper for raster previews (single channel in [0,1]).
void write_png_gray8(const std::string& path, const Image& img);

// Area-average resize when shrinking along an axis, nearest when growing;
// mode "nearest" forces nearest in both directions.
enum class ResizeMode { kNearest, kAreaAverage };
Image resize(const Image& src, int out_h, int out_w, ResizeMode mode);

// Separable Gaussian blur, kernel truncated at the given radius (pixels).
Image gaussian_blur(const Image& src, double sigma, int radius);

Image flip_horizontal(const Image& src);
Image rotate_bilinear(const Image& src, double angle_rad);  // same size, edge-clamped
Image adjust_brightness_contrast(const Image& src, float brightness, float contrast);

}  // namespace graft

#endif  // GRAFT_IMAGE_HPP
