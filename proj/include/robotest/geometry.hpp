#pragma once

#include <algorithm>
#include <cmath>

namespace robotest {

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }

    Vec2 normalized() const {
        double n = norm();
        return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
    }

    // CCW rotation in a y-down frame appears clockwise on screen; the math
    // convention is the usual one.
    Vec2 rotated(double angle) const {
        double c = std::cos(angle), s = std::sin(angle);
        return {x * c - y * s, x * s + y * c};
    }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Axis-aligned pixel rectangle, x/y = top-left corner.
struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    Vec2 center() const { return {x + w / 2.0, y + h / 2.0}; }
    int right() const { return x + w; }
    int bottom() const { return y + h; }

    bool contains(const Vec2& p) const {
        return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h;
    }
    bool contains(const Rect& o) const {
        return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
    }

    Rect intersect(const Rect& o) const {
        int x0 = std::max(x, o.x), y0 = std::max(y, o.y);
        int x1 = std::min(right(), o.right()), y1 = std::min(bottom(), o.bottom());
        if (x1 <= x0 || y1 <= y0) return {0, 0, 0, 0};
        return {x0, y0, x1 - x0, y1 - y0};
    }
};

inline double rect_iou(const Rect& a, const Rect& b) {
    long long inter = a.intersect(b).area();
    long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    while (a > kPi) a -= 2 * kPi;
    while (a <= -kPi) a += 2 * kPi;
    return a;
}

} // namespace robotest
