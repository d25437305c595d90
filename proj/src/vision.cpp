#include "robotest/vision.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "robotest/error.hpp"

namespace robotest::vision {

size_t EdgeMap::count() const {
    return static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

namespace {

std::vector<float> gaussian_kernel(double sigma) {
    int radius = std::max(1, static_cast<int>(std::lround(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

std::vector<float> gaussian_blur(const Image& gray, double sigma) {
    auto k = gaussian_kernel(sigma);
    int radius = (static_cast<int>(k.size()) - 1) / 2;
    int w = gray.width, h = gray.height;
    std::vector<float> tmp(static_cast<size_t>(w) * h), out(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                int xi = std::clamp(x + i, 0, w - 1);
                acc += k[i + radius] * gray.at(xi, y);
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float acc = 0.f;
            for (int i = -radius; i <= radius; ++i) {
                int yi = std::clamp(y + i, 0, h - 1);
                acc += k[i + radius] * tmp[static_cast<size_t>(yi) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

struct Component {
    Rect bbox;
    int pixels = 0;
    int label = 0;
};

// 8-connected labeling; labels_out gets -1 on background.
std::vector<Component> connected_components(const uint8_t* mask, int w, int h, int min_px,
                                            std::vector<int>* labels_out) {
    std::vector<int> labels(static_cast<size_t>(w) * h, -1);
    std::vector<Component> comps;
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t idx = static_cast<size_t>(y) * w + x;
            if (!mask[idx] || labels[idx] >= 0) continue;
            int label = static_cast<int>(comps.size());
            Component comp;
            comp.label = label;
            int min_x = x, max_x = x, min_y = y, max_y = y;
            labels[idx] = label;
            stack.push_back(static_cast<int>(idx));
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                int cx = cur % w, cy = cur / w;
                ++comp.pixels;
                min_x = std::min(min_x, cx);
                max_x = std::max(max_x, cx);
                min_y = std::min(min_y, cy);
                max_y = std::max(max_y, cy);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        size_t nidx = static_cast<size_t>(ny) * w + nx;
                        if (mask[nidx] && labels[nidx] < 0) {
                            labels[nidx] = label;
                            stack.push_back(static_cast<int>(nidx));
                        }
                    }
            }
            comp.bbox = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
            if (comp.pixels >= min_px) comps.push_back(comp);
        }
    }
    if (labels_out) *labels_out = std::move(labels);
    return comps;
}

} // namespace

EdgeMap canny(const Image& img, double low, double high, double sigma) {
    Image gray = img.to_gray();
    int w = gray.width, h = gray.height;
    auto smooth = gaussian_blur(gray, sigma);

    std::vector<float> mag(static_cast<size_t>(w) * h, 0.f);
    std::vector<uint8_t> sector(static_cast<size_t>(w) * h, 0);
    auto S = [&](int x, int y) {
        return smooth[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float gx = (S(x + 1, y - 1) + 2 * S(x + 1, y) + S(x + 1, y + 1)) -
                       (S(x - 1, y - 1) + 2 * S(x - 1, y) + S(x - 1, y + 1));
            float gy = (S(x - 1, y + 1) + 2 * S(x, y + 1) + S(x + 1, y + 1)) -
                       (S(x - 1, y - 1) + 2 * S(x, y - 1) + S(x + 1, y - 1));
            size_t idx = static_cast<size_t>(y) * w + x;
            // L1 magnitude on the smoothed image, matching the usual Sobel
            // threshold scale (a contrast-C step peaks near 2C).
            mag[idx] = std::abs(gx) + std::abs(gy);
            double angle = std::atan2(gy, gx);
            if (angle < 0) angle += kPi;
            sector[idx] = static_cast<uint8_t>(static_cast<int>(std::floor(angle / (kPi / 4.0) + 0.5)) % 4);
        }
    }

    // Non-maximum suppression along the gradient direction; the asymmetric
    // comparison keeps exactly one pixel on two-wide plateaus.
    static const int dx4[4] = {1, 1, 0, -1};
    static const int dy4[4] = {0, 1, 1, 1};
    EdgeMap nms = EdgeMap::make(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t idx = static_cast<size_t>(y) * w + x;
            if (mag[idx] < low) continue;
            int d = sector[idx];
            auto M = [&](int xi, int yi) -> float {
                if (xi < 0 || yi < 0 || xi >= w || yi >= h) return -1.f;
                return mag[static_cast<size_t>(yi) * w + xi];
            };
            float prev = M(x - dx4[d], y - dy4[d]);
            float next = M(x + dx4[d], y + dy4[d]);
            if (mag[idx] > prev && mag[idx] >= next) nms.at(x, y) = 1;
        }
    }

    // Double-threshold hysteresis: strong pixels seed, weak pixels join.
    EdgeMap out = EdgeMap::make(w, h);
    std::vector<int> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t idx = static_cast<size_t>(y) * w + x;
            if (nms.at(x, y) && mag[idx] >= high && !out.at(x, y)) {
                out.at(x, y) = 1;
                stack.push_back(static_cast<int>(idx));
                while (!stack.empty()) {
                    int cur = stack.back();
                    stack.pop_back();
                    int cx = cur % w, cy = cur / w;
                    for (int ddy = -1; ddy <= 1; ++ddy)
                        for (int ddx = -1; ddx <= 1; ++ddx) {
                            int nx = cx + ddx, ny = cy + ddy;
                            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                            size_t nidx = static_cast<size_t>(ny) * w + nx;
                            if (nms.at(nx, ny) && mag[nidx] >= low && !out.mask[nidx]) {
                                out.mask[nidx] = 1;
                                stack.push_back(static_cast<int>(nidx));
                            }
                        }
                }
            }
        }
    return out;
}

EdgeMap morph_close(const EdgeMap& edges, int kernel) {
    if (kernel < 1 || kernel % 2 == 0)
        raise(ErrorCode::ConfigError, "closing kernel must be odd and >= 1");
    if (kernel == 1) return edges;
    int r = kernel / 2;
    int w = edges.width, h = edges.height;

    // Separable box dilation (outside = 0) then erosion (outside = 1).
    auto pass = [&](const std::vector<uint8_t>& in, bool dilate) {
        std::vector<uint8_t> mid(in.size()), out(in.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                uint8_t v = dilate ? 0 : 1;
                for (int i = -r; i <= r; ++i) {
                    int xi = x + i;
                    uint8_t s = (xi < 0 || xi >= w) ? (dilate ? 0 : 1)
                                                    : in[static_cast<size_t>(y) * w + xi];
                    v = dilate ? std::max(v, s) : std::min(v, s);
                }
                mid[static_cast<size_t>(y) * w + x] = v;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                uint8_t v = dilate ? 0 : 1;
                for (int i = -r; i <= r; ++i) {
                    int yi = y + i;
                    uint8_t s = (yi < 0 || yi >= h) ? (dilate ? 0 : 1)
                                                    : mid[static_cast<size_t>(yi) * w + x];
                    v = dilate ? std::max(v, s) : std::min(v, s);
                }
                out[static_cast<size_t>(y) * w + x] = v;
            }
        return out;
    };

    EdgeMap out = EdgeMap::make(w, h);
    out.mask = pass(pass(edges.mask, true), false);
    return out;
}

std::vector<Rect> filter_nested(std::vector<Rect> candidates, double threshold) {
    // Descending area, ties broken lexicographically for determinism.
    std::sort(candidates.begin(), candidates.end(), [](const Rect& a, const Rect& b) {
        if (a.area() != b.area()) return a.area() > b.area();
        return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
    });
    std::vector<char> removed(candidates.size(), 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (removed[i]) continue;
            for (size_t j = 0; j < candidates.size(); ++j) {
                if (i == j || removed[j]) continue;
                if (candidates[i].contains(candidates[j]) && candidates[i].area() > 0 &&
                    static_cast<double>(candidates[j].area()) / candidates[i].area() > threshold) {
                    removed[i] = 1; // nested candidate replaces the nesting one
                    changed = true;
                    break;
                }
            }
        }
    }
    std::vector<Rect> out;
    for (size_t i = 0; i < candidates.size(); ++i)
        if (!removed[i]) out.push_back(candidates[i]);
    return out;
}

std::vector<Widget> extract_nontext(const Image& screen, const VisionParams& params) {
    EdgeMap edges = canny(screen, params.canny_low, params.canny_high, params.canny_sigma);
    EdgeMap closed = morph_close(edges, params.close_kernel);
    auto comps = connected_components(closed.mask.data(), closed.width, closed.height,
                                      params.min_candidate_px, nullptr);
    std::vector<Rect> candidates;
    candidates.reserve(comps.size());
    for (const auto& c : comps) candidates.push_back(c.bbox);
    candidates = filter_nested(std::move(candidates), params.nesting_threshold);

    double screen_area = static_cast<double>(screen.width) * screen.height;
    std::vector<Widget> widgets;
    for (const auto& r : candidates) {
        if (r.area() > params.oversize_fraction * screen_area) continue;
        Widget w;
        w.kind = WidgetKind::NonText;
        w.bounds = r;
        w.confidence = 1.0;
        widgets.push_back(std::move(w));
    }
    return widgets;
}

namespace {

// Area-average resample of one component's membership mask into tw x th.
std::vector<float> resample_component(const std::vector<int>& labels, int img_w, const Rect& bbox,
                                      int label, int tw, int th) {
    std::vector<float> out(static_cast<size_t>(tw) * th, 0.f);
    double sx = static_cast<double>(bbox.w) / tw;
    double sy = static_cast<double>(bbox.h) / th;
    for (int ty = 0; ty < th; ++ty) {
        double y0 = bbox.y + ty * sy, y1 = bbox.y + (ty + 1) * sy;
        for (int tx = 0; tx < tw; ++tx) {
            double x0 = bbox.x + tx * sx, x1 = bbox.x + (tx + 1) * sx;
            double acc = 0.0, area = 0.0;
            for (int y = static_cast<int>(std::floor(y0)); y < static_cast<int>(std::ceil(y1)); ++y) {
                double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                if (wy <= 0) continue;
                for (int x = static_cast<int>(std::floor(x0)); x < static_cast<int>(std::ceil(x1));
                     ++x) {
                    double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    if (wx <= 0) continue;
                    bool in = labels[static_cast<size_t>(y) * img_w + x] == label;
                    acc += wx * wy * (in ? 1.0 : 0.0);
                    area += wx * wy;
                }
            }
            out[static_cast<size_t>(ty) * tw + tx] = area > 0 ? static_cast<float>(acc / area) : 0.f;
        }
    }
    return out;
}

double ncc(const std::vector<float>& a, const std::vector<float>& b) {
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double xa = a[i] - ma, xb = b[i] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if (da <= 1e-12 || db <= 1e-12) return 0.0;
    return num / std::sqrt(da * db);
}

struct CharMatch {
    char ch = 0;
    double confidence = 0.0;
    Rect bbox;
};

CharMatch match_component(const std::vector<int>& labels, int img_w, const Component& comp,
                          const GlyphLibrary& lib) {
    CharMatch best;
    best.bbox = comp.bbox;
    // Resampled copies are cached per template ink size.
    std::map<std::pair<int, int>, std::vector<float>> cache;
    for (const auto& [ch, glyph] : lib.glyphs()) {
        double glyph_aspect = static_cast<double>(glyph.ink.w) / glyph.ink.h;
        double comp_aspect = static_cast<double>(comp.bbox.w) / comp.bbox.h;
        if (comp_aspect > glyph_aspect * 2.2 || comp_aspect < glyph_aspect / 2.2) continue;

        auto key = std::make_pair(glyph.ink.w, glyph.ink.h);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache
                     .emplace(key, resample_component(labels, img_w, comp.bbox, comp.label,
                                                      glyph.ink.w, glyph.ink.h))
                     .first;
        }
        std::vector<float> tmpl(static_cast<size_t>(glyph.ink.w) * glyph.ink.h);
        for (int y = 0; y < glyph.ink.h; ++y)
            for (int x = 0; x < glyph.ink.w; ++x)
                tmpl[static_cast<size_t>(y) * glyph.ink.w + x] =
                    glyph.bit(glyph.ink.x + x, glyph.ink.y + y) ? 1.f : 0.f;
        double score = ncc(it->second, tmpl);
        if (score > best.confidence) {
            best.confidence = score;
            best.ch = static_cast<char>(ch);
        }
    }
    best.confidence = std::clamp(best.confidence, 0.0, 1.0);
    return best;
}

} // namespace

std::vector<Widget> detect_text(const Image& screen, const GlyphLibrary& glyphs,
                                const VisionParams& params) {
    if (glyphs.empty()) raise(ErrorCode::ConfigError, "glyph library is empty");
    Image gray = screen.to_gray();
    std::vector<uint8_t> ink(static_cast<size_t>(gray.width) * gray.height, 0);
    for (int y = 0; y < gray.height; ++y)
        for (int x = 0; x < gray.width; ++x)
            ink[static_cast<size_t>(y) * gray.width + x] = gray.at(x, y) < params.ink_threshold;

    std::vector<int> labels;
    auto comps = connected_components(ink.data(), gray.width, gray.height, 8, &labels);

    // Coarse pass: group ink components into line boxes by vertical overlap.
    std::vector<std::vector<Component>> lines;
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
        return std::tie(a.bbox.y, a.bbox.x) < std::tie(b.bbox.y, b.bbox.x);
    });
    for (const auto& comp : comps) {
        bool placed = false;
        for (auto& line : lines) {
            int top = std::min(line.front().bbox.y, comp.bbox.y);
            int bottom = std::max(line.front().bbox.bottom(), comp.bbox.bottom());
            int overlap = std::min(line.front().bbox.bottom(), comp.bbox.bottom()) -
                          std::max(line.front().bbox.y, comp.bbox.y);
            int min_h = std::min(line.front().bbox.h, comp.bbox.h);
            (void)top;
            (void)bottom;
            if (overlap > 0 && overlap >= min_h / 2) {
                line.push_back(comp);
                placed = true;
                break;
            }
        }
        if (!placed) lines.push_back({comp});
    }

    std::vector<Widget> out;
    for (auto& line : lines) {
        std::sort(line.begin(), line.end(),
                  [](const Component& a, const Component& b) { return a.bbox.x < b.bbox.x; });

        // Refined pass: per-character re-match, low-confidence fragments drop.
        std::vector<CharMatch> kept;
        int line_height = 0;
        for (const auto& comp : line) line_height = std::max(line_height, comp.bbox.h);
        for (const auto& comp : line) {
            CharMatch m = match_component(labels, gray.width, comp, glyphs);
            if (m.ch != 0 && m.confidence >= params.text_confidence_floor) kept.push_back(m);
        }
        if (kept.empty()) continue;

        // Merge fragments whose spacing reads as intra-word; larger gaps are
        // word separators.
        double word_gap = params.word_gap_height_ratio * line_height;
        std::vector<std::vector<CharMatch>> groups;
        groups.push_back({kept.front()});
        for (size_t i = 1; i < kept.size(); ++i) {
            double gap = kept[i].bbox.x - groups.back().back().bbox.right();
            if (gap < word_gap)
                groups.back().push_back(kept[i]);
            else
                groups.push_back({kept[i]});
        }

        for (const auto& group : groups) {
            Widget w;
            w.kind = WidgetKind::Text;
            int x0 = group.front().bbox.x, y0 = group.front().bbox.y;
            int x1 = group.front().bbox.right(), y1 = group.front().bbox.bottom();
            double conf = 0.0;
            for (const auto& m : group) {
                w.text.push_back(m.ch);
                x0 = std::min(x0, m.bbox.x);
                y0 = std::min(y0, m.bbox.y);
                x1 = std::max(x1, m.bbox.right());
                y1 = std::max(y1, m.bbox.bottom());
                conf += m.confidence;
            }
            w.bounds = {x0, y0, x1 - x0, y1 - y0};
            w.confidence = conf / group.size();
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<Widget> merge_widgets(const std::vector<Widget>& text,
                                  const std::vector<Widget>& nontext, double dedup_iou) {
    std::vector<Widget> out = text;
    for (const auto& n : nontext) {
        bool duplicate = false;
        for (const auto& t : text) {
            if (rect_iou(n.bounds, t.bounds) > dedup_iou) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) out.push_back(n);
    }
    std::sort(out.begin(), out.end(), [](const Widget& a, const Widget& b) {
        return std::tie(a.bounds.y, a.bounds.x, a.bounds.w, a.bounds.h, a.text) <
               std::tie(b.bounds.y, b.bounds.x, b.bounds.w, b.bounds.h, b.text);
    });
    return out;
}

namespace {

struct RegionQuad {
    std::array<Vec2, 4> corners;
    double quad_area = 0.0;
    int region_pixels = 0;
};

double quad_area(const std::array<Vec2, 4>& c) {
    double a = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Vec2& p = c[i];
        const Vec2& q = c[(i + 1) % 4];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) / 2.0;
}

// Least-squares line fit of subpixel edge samples, then corner intersection.
// Scans run per row (left/right edges) or per column (top/bottom) between the
// owning corners only; the per-scan extrema of the filled region are robust
// against widget holes in the interior.
struct FitLine {
    double a = 0.0, b = 0.0; // x = a*y + b (vertical) or y = a*x + b (horizontal)
    bool valid = false;
};

std::array<Vec2, 4> refine_corners(const std::vector<uint8_t>& region, const Image& gray,
                                   const std::array<Vec2, 4>& rough) {
    const int w = gray.width, h = gray.height;
    auto in_region = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && region[static_cast<size_t>(y) * w + x];
    };

    // Subpixel boundary along one scan line: locate the half-level crossing
    // of the raw intensities around the region's first pixel.
    auto subpixel = [&](int bx, int by, int dx, int dy) -> double {
        auto sample = [&](int k) {
            int x = std::clamp(bx + k * dx, 0, w - 1);
            int y = std::clamp(by + k * dy, 0, h - 1);
            return static_cast<double>(gray.at(x, y));
        };
        double inside = sample(3);
        double outside = sample(-3);
        double mid = 0.5 * (inside + outside);
        for (int k = -3; k < 3; ++k) {
            double v0 = sample(k), v1 = sample(k + 1);
            if ((v0 - mid) * (v1 - mid) <= 0 && v0 != v1) {
                double t = (mid - v0) / (v1 - v0);
                return k + t;
            }
        }
        return -0.5; // fall back to the pixel boundary
    };

    auto fit = [&](bool vertical, bool min_side, double lo, double hi) -> FitLine {
        FitLine line;
        std::vector<Vec2> pts;
        int lo_i = static_cast<int>(std::ceil(lo)), hi_i = static_cast<int>(std::floor(hi));
        int margin = std::max(3, (hi_i - lo_i) / 12);
        for (int t = lo_i + margin; t <= hi_i - margin; ++t) {
            int found = -1;
            if (vertical) {
                if (min_side) {
                    for (int x = 0; x < w; ++x)
                        if (in_region(x, t)) { found = x; break; }
                } else {
                    for (int x = w - 1; x >= 0; --x)
                        if (in_region(x, t)) { found = x; break; }
                }
            } else {
                if (min_side) {
                    for (int y = 0; y < h; ++y)
                        if (in_region(t, y)) { found = y; break; }
                } else {
                    for (int y = h - 1; y >= 0; --y)
                        if (in_region(t, y)) { found = y; break; }
                }
            }
            if (found < 0) continue;
            int step = min_side ? -1 : 1; // direction pointing out of the region
            double off;
            if (vertical)
                off = subpixel(found, t, -step, 0) * -step;
            else
                off = subpixel(t, found, 0, -step) * -step;
            pts.push_back({static_cast<double>(t), found + off});
        }
        if (pts.size() < 8) return line;
        // Trimmed refit: drop outliers (widget holes touching the rim).
        for (int pass = 0; pass < 2; ++pass) {
            double st = 0, sv = 0, stt = 0, stv = 0;
            for (const auto& p : pts) {
                st += p.x;
                sv += p.y;
                stt += p.x * p.x;
                stv += p.x * p.y;
            }
            double n = static_cast<double>(pts.size());
            double denom = n * stt - st * st;
            if (std::abs(denom) < 1e-9) return line;
            line.a = (n * stv - st * sv) / denom;
            line.b = (sv - line.a * st) / n;
            line.valid = true;
            if (pass == 0) {
                std::vector<Vec2> kept;
                for (const auto& p : pts)
                    if (std::abs(p.y - (line.a * p.x + line.b)) < 2.0) kept.push_back(p);
                if (kept.size() < 8) break;
                pts = std::move(kept);
            }
        }
        return line;
    };

    // Each edge is sampled strictly between its own endpoints.
    FitLine left = fit(true, true, std::min(rough[0].y, rough[3].y) + 2,
                       std::max(rough[0].y, rough[3].y) - 2);
    FitLine right = fit(true, false, std::min(rough[1].y, rough[2].y) + 2,
                        std::max(rough[1].y, rough[2].y) - 2);
    FitLine top = fit(false, true, std::min(rough[0].x, rough[1].x) + 2,
                      std::max(rough[0].x, rough[1].x) - 2);
    FitLine bottom = fit(false, false, std::min(rough[2].x, rough[3].x) + 2,
                         std::max(rough[2].x, rough[3].x) - 2);
    if (!left.valid || !right.valid || !top.valid || !bottom.valid) return rough;

    auto intersect = [](const FitLine& v, const FitLine& hline) -> Vec2 {
        // x = v.a*y + v.b with y = h.a*x + h.b
        double denom = 1.0 - v.a * hline.a;
        if (std::abs(denom) < 1e-9) return {v.b, hline.b};
        double x = (v.a * hline.b + v.b) / denom;
        double y = hline.a * x + hline.b;
        return {x, y};
    };
    return {intersect(left, top), intersect(right, top), intersect(right, bottom),
            intersect(left, bottom)};
}

} // namespace

camera::ScreenQuad detect_screen(const Image& photo, double physical_width_mm,
                                 const VisionParams& params) {
    Image gray = photo.to_gray();
    int w = gray.width, h = gray.height;
    auto smooth = gaussian_blur(gray, 1.0);
    auto S = [&](int x, int y) { return smooth[static_cast<size_t>(y) * w + x]; };

    // Seeds: bright and locally flat points win.
    struct Seed {
        double score;
        int x, y;
    };
    std::vector<Seed> seeds;
    for (int y = 8; y < h - 8; y += 16) {
        for (int x = 8; x < w - 8; x += 16) {
            double gmag = std::abs(S(x + 2, y) - S(x - 2, y)) + std::abs(S(x, y + 2) - S(x, y - 2));
            seeds.push_back({S(x, y) - 2.0 * gmag, x, y});
        }
    }
    std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });

    const double tol = 26.0;
    const double min_area = params.screen_min_area_fraction * w * h;
    std::vector<uint8_t> visited(static_cast<size_t>(w) * h, 0);
    std::vector<uint8_t> best_region;
    RegionQuad best;
    bool found = false;

    int tried = 0;
    for (const auto& seed : seeds) {
        if (tried >= 24) break;
        size_t sidx = static_cast<size_t>(seed.y) * w + seed.x;
        if (visited[sidx]) continue;
        ++tried;

        // Flood fill around the seed intensity.
        double ref = S(seed.x, seed.y);
        std::vector<uint8_t> region(static_cast<size_t>(w) * h, 0);
        std::vector<int> stack{static_cast<int>(sidx)};
        visited[sidx] = 1;
        region[sidx] = 1;
        int count = 0;
        int min_x = seed.x, max_x = seed.x, min_y = seed.y, max_y = seed.y;
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            int cx = cur % w, cy = cur / w;
            ++count;
            min_x = std::min(min_x, cx);
            max_x = std::max(max_x, cx);
            min_y = std::min(min_y, cy);
            max_y = std::max(max_y, cy);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dx && !dy) continue;
                    int nx = cx + dx, ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    size_t nidx = static_cast<size_t>(ny) * w + nx;
                    if (!visited[nidx] && std::abs(S(nx, ny) - ref) <= tol) {
                        visited[nidx] = 1;
                        region[nidx] = 1;
                        stack.push_back(static_cast<int>(nidx));
                    }
                }
        }
        if (count < min_area) continue;
        // The screen sits strictly inside the frame; regions reaching the
        // photo border are scene background.
        if (min_x <= 1 || min_y <= 1 || max_x >= w - 2 || max_y >= h - 2) continue;

        // Corner extraction via the (x+y, x-y) extrema, valid below 45 deg.
        double best_sum_lo = 1e18, best_sum_hi = -1e18, best_diff_lo = 1e18, best_diff_hi = -1e18;
        Vec2 tl, tr, br, bl;
        for (int y = min_y; y <= max_y; ++y)
            for (int x = min_x; x <= max_x; ++x) {
                if (!region[static_cast<size_t>(y) * w + x]) continue;
                double sum = x + y, diff = x - y;
                if (sum < best_sum_lo) { best_sum_lo = sum; tl = {double(x), double(y)}; }
                if (sum > best_sum_hi) { best_sum_hi = sum; br = {double(x), double(y)}; }
                if (diff > best_diff_hi) { best_diff_hi = diff; tr = {double(x), double(y)}; }
                if (diff < best_diff_lo) { best_diff_lo = diff; bl = {double(x), double(y)}; }
            }
        std::array<Vec2, 4> rough{tl, tr, br, bl};
        std::array<Vec2, 4> corners = refine_corners(region, gray, rough);

        RegionQuad rq{corners, quad_area(corners), count};
        // Rectangle-likeness: the filled background must cover a fair share
        // of its enclosing quad.
        if (rq.quad_area <= 0 || count < 0.4 * rq.quad_area) continue;
        if (!found || rq.quad_area > best.quad_area) {
            best = rq;
            best_region = std::move(region);
            found = true;
        }
    }

    if (!found)
        raise(ErrorCode::NoScreenFound, "no rectangle-like region above the area floor");

    camera::ScreenQuad quad;
    quad.corners = best.corners;
    auto ds = camera::measure_deflection(quad.corners, physical_width_mm);
    quad.deflection_rad = ds.angle_rad;
    quad.scale = ds.scale_mm_per_px; // provisional: mm per photo pixel
    return quad;
}

void draw_widget_overlay(Image& img, const std::vector<Widget>& widgets) {
    for (const auto& w : widgets) {
        uint8_t v = w.kind == WidgetKind::Text ? 0 : 128;
        draw_rect_outline(img, w.bounds, 1, v);
    }
}

} // namespace robotest::vision
