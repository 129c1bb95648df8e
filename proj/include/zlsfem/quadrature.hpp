#pragma once

#include <stdexcept>
#include <vector>

#include "zlsfem/geometry.hpp"

namespace zlsfem {

// Quadrature on the reference triangle (0,0), (1,0), (0,1); weights sum to
// its area 1/2.
struct QuadRule {
    struct Point {
        double xi, eta, w;
    };
    std::vector<Point> points;
    int degree = 0;
};

inline const QuadRule& quadrature_rule(int degree) {
    static const QuadRule deg1{{{1.0 / 3.0, 1.0 / 3.0, 0.5}}, 1};
    static const QuadRule deg2{{{0.5, 0.0, 1.0 / 6.0}, {0.5, 0.5, 1.0 / 6.0}, {0.0, 0.5, 1.0 / 6.0}}, 2};
    static const QuadRule deg3{{{1.0 / 3.0, 1.0 / 3.0, -27.0 / 96.0},
                                {0.2, 0.2, 25.0 / 96.0},
                                {0.6, 0.2, 25.0 / 96.0},
                                {0.2, 0.6, 25.0 / 96.0}},
                               3};
    // Dunavant 6-point rule
    static const QuadRule deg4 = [] {
        QuadRule r;
        r.degree = 4;
        const double a = 0.445948490915965;
        const double wa = 0.223381589678011 * 0.5;
        const double b = 0.091576213509771;
        const double wb = 0.109951743655322 * 0.5;
        r.points = {
            {a, a, wa},           {1.0 - 2.0 * a, a, wa}, {a, 1.0 - 2.0 * a, wa},
            {b, b, wb},           {1.0 - 2.0 * b, b, wb}, {b, 1.0 - 2.0 * b, wb},
        };
        return r;
    }();
    switch (degree) {
        case 1: return deg1;
        case 2: return deg2;
        case 3: return deg3;
        case 4: return deg4;
        default: throw std::invalid_argument("quadrature_rule: unsupported degree");
    }
}

// Map a reference point to a physical triangle; the physical weight is
// w_ref * 2|T|.
inline Vec2 map_to_triangle(Vec2 p0, Vec2 p1, Vec2 p2, double xi, double eta) {
    return p0 + (p1 - p0) * xi + (p2 - p0) * eta;
}

} // namespace zlsfem
