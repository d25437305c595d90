#include "robotest/glyphs.hpp"

#include <filesystem>

#include "robotest/error.hpp"

namespace fs = std::filesystem;

namespace robotest::vision {

namespace {

// 5x7 uppercase font, one byte per row, bit 4 = leftmost column.
struct FontRow {
    char ch;
    uint8_t rows[7];
};

constexpr FontRow kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
};

Glyph glyph_from_rows(char ch, const uint8_t rows[7]) {
    Glyph g;
    g.ch = ch;
    int min_x = g.width, max_x = -1, min_y = g.height, max_y = -1;
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            bool set = rows[y] & (1 << (g.width - 1 - x));
            g.mask[y * g.width + x] = set ? 1 : 0;
            if (set) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    g.ink = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
    return g;
}

} // namespace

const GlyphLibrary& GlyphLibrary::builtin() {
    static const GlyphLibrary lib = [] {
        GlyphLibrary l;
        for (const auto& row : kFont) l.glyphs_[row.ch] = glyph_from_rows(row.ch, row.rows);
        return l;
    }();
    return lib;
}

const Glyph* GlyphLibrary::find(char c) const {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    auto it = glyphs_.find(c);
    return it == glyphs_.end() ? nullptr : &it->second;
}

void GlyphLibrary::save_png_dir(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& [ch, g] : glyphs_) {
        Image img = Image::make(g.width, g.height, 1, 255);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x)
                if (g.bit(x, y)) img.at(x, y) = 0;
        save_png(img, (fs::path(dir) / (std::string(1, ch) + ".png")).string());
    }
}

GlyphLibrary GlyphLibrary::load_png_dir(const std::string& dir) {
    GlyphLibrary lib;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".png") continue;
        std::string stem = entry.path().stem().string();
        if (stem.size() != 1) continue;
        Image img = load_png(entry.path().string()).to_gray();
        if (img.width != kGlyphWidth || img.height != kGlyphHeight)
            raise(ErrorCode::IoError, "glyph template must be 5x7: " + entry.path().string());
        uint8_t rows[7] = {};
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (img.at(x, y) < 128) rows[y] |= 1 << (kGlyphWidth - 1 - x);
        lib.glyphs_[stem[0]] = glyph_from_rows(stem[0], rows);
    }
    if (lib.empty()) raise(ErrorCode::IoError, "no glyph templates in " + dir);
    return lib;
}

int text_width_px(const std::string& text, int scale) {
    if (text.empty()) return 0;
    int units = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        units += text[i] == ' ' ? kSpaceAdvance : kGlyphWidth;
        if (i + 1 < text.size()) units += kGlyphGap;
    }
    return units * scale;
}

void draw_text(Image& img, int x, int y, const std::string& text, int scale, uint8_t ink) {
    const GlyphLibrary& lib = GlyphLibrary::builtin();
    int cursor = x;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == ' ') {
            cursor += kSpaceAdvance * scale;
        } else {
            const Glyph* g = lib.find(c);
            if (g) {
                for (int gy = 0; gy < g->height; ++gy)
                    for (int gx = 0; gx < g->width; ++gx)
                        if (g->bit(gx, gy))
                            fill_rect(img, {cursor + gx * scale, y + gy * scale, scale, scale}, ink);
            }
            cursor += kGlyphWidth * scale;
        }
        if (i + 1 < text.size()) cursor += kGlyphGap * scale;
    }
}

} // namespace robotest::vision
