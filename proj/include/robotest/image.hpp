#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robotest/geometry.hpp"

namespace robotest {

// 8-bit raster, 1 (grayscale) or 3 (RGB) channels, row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> data;

    static Image make(int w, int h, int c = 1, uint8_t fill = 0) {
        Image img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.data.assign(static_cast<size_t>(w) * h * c, fill);
        return img;
    }

    bool empty() const { return width <= 0 || height <= 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    // Luma for RGB, plain value for grayscale.
    double gray(int x, int y) const {
        if (channels == 1) return at(x, y);
        return 0.299 * at(x, y, 0) + 0.587 * at(x, y, 1) + 0.114 * at(x, y, 2);
    }

    Image to_gray() const;

    // Bilinear sample of one channel; `inside` is set false when the sample
    // window leaves the image.
    double bilinear(double x, double y, int c, bool& inside) const;
};

double mean_abs_diff(const Image& a, const Image& b);
Image resize_bilinear(const Image& src, int w, int h);

// PNG I/O (libpng).
Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Raw grayscale matrix format for golden tests (binary PGM, P5).
Image load_pgm(const std::string& path);
void save_pgm(const Image& img, const std::string& path);

// Drawing primitives used by the rasterizer and debug overlays.
void fill_rect(Image& img, const Rect& r, uint8_t value);
void fill_rect_rgb(Image& img, const Rect& r, uint8_t cr, uint8_t cg, uint8_t cb);
void draw_rect_outline(Image& img, const Rect& r, int thickness, uint8_t value);
void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, uint8_t value);
void draw_line(Image& img, Vec2 a, Vec2 b, uint8_t value);

} // namespace robotest
