#pragma once

#include <map>
#include <string>

#include "robotest/image.hpp"

namespace robotest::vision {

// One template glyph: a binary 5x7 bitmap plus its tight ink box.
struct Glyph {
    char ch = 0;
    int width = 5;
    int height = 7;
    std::array<uint8_t, 35> mask{}; // row-major, 1 = ink
    Rect ink;                       // tight bounding box of the set bits

    bool bit(int x, int y) const { return mask[y * width + x] != 0; }
};

// The simulator's glyph set doubles as the matching template library: the
// renderer draws with these bitmaps and the text detector correlates against
// them, standing in for an OCR engine.
class GlyphLibrary {
public:
    static const GlyphLibrary& builtin(); // A-Z and 0-9

    const Glyph* find(char c) const;
    bool empty() const { return glyphs_.empty(); }
    size_t size() const { return glyphs_.size(); }
    const std::map<char, Glyph>& glyphs() const { return glyphs_; }

    // Directory of named PNG templates (one file per glyph, e.g. "A.png").
    void save_png_dir(const std::string& dir) const;
    static GlyphLibrary load_png_dir(const std::string& dir);

private:
    std::map<char, Glyph> glyphs_;
};

// Layout units: a character cell is 5 units wide, 7 tall; consecutive glyphs
// are separated by 1 unit and a space advances 4 units.
constexpr int kGlyphWidth = 5;
constexpr int kGlyphHeight = 7;
constexpr int kGlyphGap = 1;
constexpr int kSpaceAdvance = 4;

int text_width_px(const std::string& text, int scale);
inline int text_height_px(int scale) { return kGlyphHeight * scale; }

// Paints `text` with its layout box's top-left at (x, y).
void draw_text(Image& img, int x, int y, const std::string& text, int scale, uint8_t ink);

} // namespace robotest::vision
