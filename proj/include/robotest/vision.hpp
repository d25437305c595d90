#pragma once

#include <string>
#include <vector>

#include "robotest/camera.hpp"
#include "robotest/glyphs.hpp"
#include "robotest/image.hpp"

namespace robotest::vision {

enum class WidgetKind { Text, NonText };

struct Widget {
    WidgetKind kind = WidgetKind::NonText;
    Rect bounds;
    std::string text;        // set iff kind == Text
    double confidence = 1.0; // extraction confidence, [0, 1]

    // Non-intrusive stand-in for the input flag: wide flat boxes read as
    // text fields.
    bool looks_like_input_field() const {
        return kind == WidgetKind::NonText && bounds.h > 0 &&
               static_cast<double>(bounds.w) / bounds.h >= 4.0;
    }
};

struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> mask; // 0/1

    static EdgeMap make(int w, int h) {
        EdgeMap e;
        e.width = w;
        e.height = h;
        e.mask.assign(static_cast<size_t>(w) * h, 0);
        return e;
    }
    uint8_t& at(int x, int y) { return mask[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return mask[static_cast<size_t>(y) * width + x]; }
    size_t count() const;
};

struct VisionParams {
    double canny_low = 50.0;
    double canny_high = 150.0;
    double canny_sigma = 1.4;
    int close_kernel = 5;
    double nesting_threshold = 0.85;  // nested/nesting area ratio
    double oversize_fraction = 0.9;   // candidates above this screen fraction drop
    double text_confidence_floor = 0.8;
    double dedup_iou = 0.7;
    double screen_min_area_fraction = 0.05;
    int ink_threshold = 140;           // binarization level for dark ink
    double word_gap_height_ratio = 0.45; // gaps below ratio*line height merge
    int min_candidate_px = 6;          // speckle floor for contour candidates
};

EdgeMap canny(const Image& img, double low, double high, double sigma = 1.4);
EdgeMap morph_close(const EdgeMap& edges, int kernel);

// Nesting elimination on raw candidate boxes; exposed for direct testing.
std::vector<Rect> filter_nested(std::vector<Rect> candidates, double threshold);

std::vector<Widget> extract_nontext(const Image& screen, const VisionParams& params = {});

std::vector<Widget> detect_text(const Image& screen, const GlyphLibrary& glyphs,
                                const VisionParams& params = {});

// Coordinate-based dedup: overlapping text/non-text pairs keep the text
// widget; output sorted top-to-bottom, left-to-right.
std::vector<Widget> merge_widgets(const std::vector<Widget>& text,
                                  const std::vector<Widget>& nontext, double dedup_iou = 0.7);

// Finds the screen quad in a desk photo and attaches deflection/scale for the
// movement transformation. Throws NoScreenFound.
camera::ScreenQuad detect_screen(const Image& photo, double physical_width_mm,
                                 const VisionParams& params = {});

void draw_widget_overlay(Image& img, const std::vector<Widget>& widgets);

} // namespace robotest::vision
