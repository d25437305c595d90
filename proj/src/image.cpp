#include "robotest/image.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <png.h>

#include "robotest/error.hpp"

namespace robotest {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::Unreachable: return "Unreachable";
        case ErrorCode::DegenerateTarget: return "DegenerateTarget";
        case ErrorCode::TargetOutOfBounds: return "TargetOutOfBounds";
        case ErrorCode::UnknownCharacter: return "UnknownCharacter";
        case ErrorCode::OutOfScreen: return "OutOfScreen";
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::InsufficientViews: return "InsufficientViews";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::DegeneratePoints: return "DegeneratePoints";
        case ErrorCode::QuadOutOfBounds: return "QuadOutOfBounds";
        case ErrorCode::DegenerateQuad: return "DegenerateQuad";
        case ErrorCode::NoScreenFound: return "NoScreenFound";
        case ErrorCode::UnknownScreen: return "UnknownScreen";
        case ErrorCode::DeviceOutOfFrame: return "DeviceOutOfFrame";
        case ErrorCode::NoWidgets: return "NoWidgets";
        case ErrorCode::EmptyImage: return "EmptyImage";
        case ErrorCode::MismatchedScreens: return "MismatchedScreens";
        case ErrorCode::ProfileMismatch: return "ProfileMismatch";
        case ErrorCode::MissingRuns: return "MissingRuns";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Error";
}

Image Image::to_gray() const {
    if (channels == 1) return *this;
    Image out = Image::make(width, height, 1);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out.at(x, y) = static_cast<uint8_t>(std::lround(gray(x, y)));
    return out;
}

double Image::bilinear(double x, double y, int c, bool& inside) const {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = x0 + 1, y1 = y0 + 1;
    if (x0 < 0 || y0 < 0 || x1 >= width || y1 >= height) {
        // Allow samples exactly on the last row/column.
        if (x >= 0 && y >= 0 && x <= width - 1 && y <= height - 1) {
            inside = true;
            int xi = std::min(static_cast<int>(std::lround(x)), width - 1);
            int yi = std::min(static_cast<int>(std::lround(y)), height - 1);
            return at(xi, yi, c);
        }
        inside = false;
        return 0.0;
    }
    inside = true;
    double fx = x - x0, fy = y - y0;
    double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
    double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
    return v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) + v01 * (1 - fx) * fy + v11 * fx * fy;
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels || a.empty())
        raise(ErrorCode::EmptyImage, "mean_abs_diff expects equal non-empty images");
    double sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        sum += std::abs(static_cast<int>(a.data[i]) - static_cast<int>(b.data[i]));
    return sum / static_cast<double>(a.data.size());
}

Image resize_bilinear(const Image& src, int w, int h) {
    if (src.empty() || w <= 0 || h <= 0) raise(ErrorCode::EmptyImage, "resize of empty image");
    Image out = Image::make(w, h, src.channels);
    double sx = static_cast<double>(src.width) / w;
    double sy = static_cast<double>(src.height) / h;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            double fy = (y + 0.5) * sy - 0.5;
            bool inside = false;
            for (int c = 0; c < src.channels; ++c) {
                double v = src.bilinear(std::clamp(fx, 0.0, src.width - 1.0),
                                        std::clamp(fy, 0.0, src.height - 1.0), c, inside);
                out.at(x, y, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    return out;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

} // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) raise(ErrorCode::IoError, "cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) raise(ErrorCode::IoError, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::IoError, "png read failed for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::IoError, "unsupported channel count in " + path);
    }

    Image img = Image::make(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.data.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const Image& img, const std::string& path) {
    if (img.empty()) raise(ErrorCode::EmptyImage, "save_png on empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) raise(ErrorCode::IoError, "cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) raise(ErrorCode::IoError, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::IoError, "png write failed for " + path);
    }
    png_init_io(png, fp.get());
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data()) +
                  static_cast<size_t>(y) * img.width * img.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image load_pgm(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) raise(ErrorCode::IoError, "cannot open " + path);
    FilePtr fp(f);
    char magic[3] = {0};
    int w = 0, h = 0, maxval = 0;
    if (std::fscanf(f, "%2s %d %d %d", magic, &w, &h, &maxval) != 4 || std::strcmp(magic, "P5") != 0 ||
        maxval != 255 || w <= 0 || h <= 0)
        raise(ErrorCode::IoError, "bad pgm header in " + path);
    std::fgetc(f); // single whitespace after header
    Image img = Image::make(w, h, 1);
    if (std::fread(img.data.data(), 1, img.data.size(), f) != img.data.size())
        raise(ErrorCode::IoError, "truncated pgm " + path);
    return img;
}

void save_pgm(const Image& img, const std::string& path) {
    Image gray = img.to_gray();
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) raise(ErrorCode::IoError, "cannot write " + path);
    FilePtr fp(f);
    std::fprintf(f, "P5\n%d %d\n255\n", gray.width, gray.height);
    std::fwrite(gray.data.data(), 1, gray.data.size(), f);
}

void fill_rect(Image& img, const Rect& r, uint8_t value) {
    Rect c = r.intersect({0, 0, img.width, img.height});
    for (int y = c.y; y < c.bottom(); ++y)
        for (int x = c.x; x < c.right(); ++x)
            for (int ch = 0; ch < img.channels; ++ch)
                img.at(x, y, ch) = value;
}

void fill_rect_rgb(Image& img, const Rect& r, uint8_t cr, uint8_t cg, uint8_t cb) {
    Rect c = r.intersect({0, 0, img.width, img.height});
    for (int y = c.y; y < c.bottom(); ++y)
        for (int x = c.x; x < c.right(); ++x) {
            img.at(x, y, 0) = cr;
            if (img.channels == 3) {
                img.at(x, y, 1) = cg;
                img.at(x, y, 2) = cb;
            }
        }
}

void draw_rect_outline(Image& img, const Rect& r, int thickness, uint8_t value) {
    fill_rect(img, {r.x, r.y, r.w, thickness}, value);
    fill_rect(img, {r.x, r.bottom() - thickness, r.w, thickness}, value);
    fill_rect(img, {r.x, r.y, thickness, r.h}, value);
    fill_rect(img, {r.right() - thickness, r.y, thickness, r.h}, value);
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, uint8_t value) {
    if (rx <= 0 || ry <= 0) return;
    int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ry)));
    for (int y = y0; y <= y1; ++y) {
        double dy = (y + 0.5 - cy) / ry;
        double span = 1.0 - dy * dy;
        if (span < 0) continue;
        double dx = rx * std::sqrt(span);
        int x0 = std::max(0, static_cast<int>(std::floor(cx - dx)));
        int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + dx)));
        for (int x = x0; x <= x1; ++x) {
            double nx = (x + 0.5 - cx) / rx, ny = (y + 0.5 - cy) / ry;
            if (nx * nx + ny * ny <= 1.0)
                for (int ch = 0; ch < img.channels; ++ch)
                    img.at(x, y, ch) = value;
        }
    }
}

void draw_line(Image& img, Vec2 a, Vec2 b, uint8_t value) {
    int steps = static_cast<int>(std::ceil(distance(a, b))) + 1;
    for (int i = 0; i <= steps; ++i) {
        double t = steps > 0 ? static_cast<double>(i) / steps : 0.0;
        int x = static_cast<int>(std::lround(a.x + (b.x - a.x) * t));
        int y = static_cast<int>(std::lround(a.y + (b.y - a.y) * t));
        if (img.in_bounds(x, y))
            for (int ch = 0; ch < img.channels; ++ch)
                img.at(x, y, ch) = value;
    }
}

} // namespace robotest
