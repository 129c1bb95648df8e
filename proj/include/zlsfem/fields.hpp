#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "zlsfem/fem_space.hpp"
#include "zlsfem/nonlinearity.hpp"
#include "zlsfem/quadrature.hpp"

namespace zlsfem {

// area of triangle cut by an axis-aligned box (Sutherland-Hodgman clipping);
// exact up to roundoff, which removes quadrature error for indicator data
inline double clip_area_box(const TriGeom& g, double x0, double x1, double y0, double y1) {
    std::vector<Vec2> poly = {g.p[0], g.p[1], g.p[2]};
    auto clip = [&poly](auto inside, auto intersect) {
        std::vector<Vec2> out;
        out.reserve(poly.size() + 2);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2 cur = poly[i];
            const Vec2 nxt = poly[(i + 1) % poly.size()];
            const bool cin = inside(cur), nin = inside(nxt);
            if (cin) out.push_back(cur);
            if (cin != nin) out.push_back(intersect(cur, nxt));
        }
        poly = std::move(out);
    };
    auto cut_x = [&clip](double bound, bool keep_below) {
        clip([bound, keep_below](Vec2 p) { return keep_below ? p.x <= bound : p.x >= bound; },
             [bound](Vec2 a, Vec2 b) {
                 const double t = (bound - a.x) / (b.x - a.x);
                 return Vec2{bound, a.y + t * (b.y - a.y)};
             });
    };
    auto cut_y = [&clip](double bound, bool keep_below) {
        clip([bound, keep_below](Vec2 p) { return keep_below ? p.y <= bound : p.y >= bound; },
             [bound](Vec2 a, Vec2 b) {
                 const double t = (bound - a.y) / (b.y - a.y);
                 return Vec2{a.x + t * (b.x - a.x), bound};
             });
    };
    cut_x(x0, false);
    if (poly.empty()) return 0.0;
    cut_x(x1, true);
    if (poly.empty()) return 0.0;
    cut_y(y0, false);
    if (poly.empty()) return 0.0;
    cut_y(y1, true);
    if (poly.size() < 3) return 0.0;
    double area2 = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        area2 += cross(poly[i], poly[(i + 1) % poly.size()]);
    return 0.5 * area2;
}

/******************************************************************************
Scalar data field. Element integrals of f and f^2 are exact for constant and
box-indicator data; analytic data uses the degree-4 rule (declared quadrature
for smooth sources).
******************************************************************************/
struct ScalarField {
    enum class Kind { zero, constant, box_indicator, analytic };
    Kind kind = Kind::zero;
    double value = 0.0;
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    std::function<double(Vec2)> fn;

    static ScalarField zero() { return {}; }
    static ScalarField constant(double v) {
        ScalarField f;
        f.kind = Kind::constant;
        f.value = v;
        return f;
    }
    static ScalarField box(double x0, double x1, double y0, double y1, double v = 1.0) {
        ScalarField f;
        f.kind = Kind::box_indicator;
        f.x0 = x0;
        f.x1 = x1;
        f.y0 = y0;
        f.y1 = y1;
        f.value = v;
        return f;
    }
    static ScalarField analytic(std::function<double(Vec2)> fn) {
        ScalarField f;
        f.kind = Kind::analytic;
        f.fn = std::move(fn);
        return f;
    }

    bool is_zero() const { return kind == Kind::zero; }

    double eval(Vec2 p) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::constant: return value;
            case Kind::box_indicator:
                return (p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1) ? value : 0.0;
            case Kind::analytic: return fn(p);
        }
        return 0.0;
    }

    // (integral of f, integral of f^2) over the triangle
    std::pair<double, double> moments(const TriGeom& g) const {
        switch (kind) {
            case Kind::zero: return {0.0, 0.0};
            case Kind::constant: return {value * g.area, value * value * g.area};
            case Kind::box_indicator: {
                const double a = clip_area_box(g, x0, x1, y0, y1);
                return {value * a, value * value * a};
            }
            case Kind::analytic: {
                const QuadRule& q = quadrature_rule(4);
                double m1 = 0.0, m2 = 0.0;
                for (const auto& qp : q.points) {
                    const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
                    const double v = fn(x);
                    const double w = qp.w * 2.0 * g.area;
                    m1 += w * v;
                    m2 += w * v * v;
                }
                return {m1, m2};
            }
        }
        return {0.0, 0.0};
    }
};

struct VectorField {
    enum class Kind { zero, constant, analytic };
    Kind kind = Kind::zero;
    Vec2 value{0, 0};
    std::function<Vec2(Vec2)> fn;

    static VectorField zero() { return {}; }
    static VectorField constant(Vec2 v) {
        VectorField f;
        f.kind = Kind::constant;
        f.value = v;
        return f;
    }
    static VectorField analytic(std::function<Vec2(Vec2)> fn) {
        VectorField f;
        f.kind = Kind::analytic;
        f.fn = std::move(fn);
        return f;
    }

    bool is_zero() const { return kind == Kind::zero; }

    Vec2 eval(Vec2 p) const {
        switch (kind) {
            case Kind::zero: return {0, 0};
            case Kind::constant: return value;
            case Kind::analytic: return fn(p);
        }
        return {0, 0};
    }
};

enum class Domain { l_shape, unit_square };

// first-order system data: -div p = f1, p - sigma(grad u) = -f2
struct ProblemSpec {
    Domain domain = Domain::l_shape;
    ScalarField f1;
    VectorField f2;
    Nonlinearity nl;
    double c_f = 0.0; // Friedrichs constant of the domain
};

} // namespace zlsfem
