#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zlsfem/quadrature.hpp"

#include <cmath>

using namespace zlsfem;

namespace {

// exact reference-triangle integral of xi^a eta^b: a! b! / (a + b + 2)!
double exact_monomial(int a, int b) {
    auto fact = [](int n) {
        double f = 1.0;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    };
    return fact(a) * fact(b) / fact(a + b + 2);
}

double integrate_monomial(const QuadRule& q, int a, int b) {
    double s = 0.0;
    for (const auto& p : q.points) s += p.w * std::pow(p.xi, a) * std::pow(p.eta, b);
    return s;
}

} // namespace

TEST_CASE("degree 1 is the centroid rule") {
    const QuadRule& q = quadrature_rule(1);
    REQUIRE(q.points.size() == 1);
    CHECK(q.points[0].xi == doctest::Approx(1.0 / 3.0));
    CHECK(q.points[0].w == doctest::Approx(0.5));
}

TEST_CASE("weights sum to the reference area for all degrees") {
    for (int d = 1; d <= 4; ++d) {
        double s = 0.0;
        for (const auto& p : quadrature_rule(d).points) s += p.w;
        CHECK(s == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("each rule integrates monomials up to its degree exactly") {
    for (int d = 1; d <= 4; ++d) {
        const QuadRule& q = quadrature_rule(d);
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b)
                CHECK(integrate_monomial(q, a, b) ==
                      doctest::Approx(exact_monomial(a, b)).epsilon(1e-13));
    }
}

TEST_CASE("degree 2 midpoint rule handles x^2, xy, y^2") {
    const QuadRule& q = quadrature_rule(2);
    REQUIRE(q.points.size() == 3);
    CHECK(integrate_monomial(q, 2, 0) == doctest::Approx(exact_monomial(2, 0)).epsilon(1e-14));
    CHECK(integrate_monomial(q, 1, 1) == doctest::Approx(exact_monomial(1, 1)).epsilon(1e-14));
    CHECK(integrate_monomial(q, 0, 2) == doctest::Approx(exact_monomial(0, 2)).epsilon(1e-14));
}

TEST_CASE("unsupported degree rejected") {
    CHECK_THROWS_AS(quadrature_rule(5), std::invalid_argument);
    CHECK_THROWS_AS(quadrature_rule(0), std::invalid_argument);
}
