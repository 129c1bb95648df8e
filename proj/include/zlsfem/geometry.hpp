#pragma once

#include <array>
#include <cmath>

namespace zlsfem {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2 operator-() const { return {-x, -y}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
inline double norm_sq(Vec2 a) { return dot(a, a); }
// rotate by -90 degrees; for an edge direction this gives a normal
inline Vec2 perp(Vec2 a) { return {a.y, -a.x}; }

struct Mat2 {
    // row-major
    double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    static Mat2 identity(double s = 1.0) {
        Mat2 r;
        r.m[0][0] = s;
        r.m[1][1] = s;
        return r;
    }
    Vec2 operator*(Vec2 v) const {
        return {m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y};
    }
    Mat2 operator+(const Mat2& o) const {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
};

// signed area of triangle (p0, p1, p2); positive for counterclockwise order
inline double signed_area(Vec2 p0, Vec2 p1, Vec2 p2) {
    return 0.5 * cross(p1 - p0, p2 - p0);
}

// symmetric 2x2 eigenvalues, ascending
inline std::array<double, 2> sym_eigenvalues(const Mat2& a) {
    const double tr = a.m[0][0] + a.m[1][1];
    const double det = a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0];
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    return {0.5 * tr - disc, 0.5 * tr + disc};
}

} // namespace zlsfem
