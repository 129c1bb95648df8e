#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zlsfem/nonlinearity.hpp"
#include "zlsfem/rng.hpp"

#include <cmath>

using namespace zlsfem;

namespace {

Vec2 random_dir(Rng& rng, double radius) {
    const double r = radius * rng.uniform();
    const double ang = rng.uniform(0.0, 6.283185307179586);
    return {r * std::cos(ang), r * std::sin(ang)};
}

} // namespace

TEST_CASE("sigma values") {
    const Nonlinearity convex = make_convex_energy();
    CHECK(norm(convex.sigma({0, 0})) == 0.0);
    const Vec2 s = convex.sigma({1, 0}); // phi(1) = 2 + 1/2
    CHECK(s.x == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(s.y == 0.0);

    const Nonlinearity forch = make_forchheimer(0.2, 20.0, 1e-2);
    CHECK(forch.phi(0.0) == doctest::Approx(5.0).epsilon(1e-15)); // 1/k1
    CHECK(norm(forch.sigma({0, 0})) == 0.0);
}

TEST_CASE("dsigma structure") {
    const Nonlinearity convex = make_convex_energy();

    SUBCASE("at zero: phi(0) I = 3 I") {
        const Mat2 d = convex.dsigma({0, 0});
        CHECK(d.m[0][0] == doctest::Approx(3.0));
        CHECK(d.m[1][1] == doctest::Approx(3.0));
        CHECK(d.m[0][1] == 0.0);
        CHECK(d.m[1][0] == 0.0);
    }
    SUBCASE("symmetric with eigenvalues in [Lambda_1, Lambda_2]") {
        Rng rng(21);
        for (const Nonlinearity& nl : {make_convex_energy(), make_forchheimer(0.2, 20.0, 1e-2)}) {
            const double radius = nl.kind == NonlinearityKind::forchheimer ? nl.grad_bound : 1e3;
            for (int i = 0; i < 2000; ++i) {
                const Vec2 xi = random_dir(rng, radius);
                const Mat2 d = nl.dsigma(xi);
                CHECK(d.m[0][1] == doctest::Approx(d.m[1][0]).epsilon(1e-14));
                const auto ev = sym_eigenvalues(d);
                CHECK(ev[0] >= nl.lambda1 - 1e-9);
                CHECK(ev[1] <= nl.lambda2 + 1e-9);
            }
        }
    }
    SUBCASE("matches central differences of sigma") {
        Rng rng(22);
        for (int i = 0; i < 200; ++i) {
            const Vec2 xi = random_dir(rng, 2.0) + Vec2{0.2, 0.1};
            const Vec2 e = random_dir(rng, 1.0);
            const double h = 1e-5;
            const Vec2 fd = (convex.sigma(xi + h * e) - convex.sigma(xi - h * e)) / (2.0 * h);
            const Vec2 an = convex.dsigma(xi) * e;
            CHECK(norm(fd - an) < 1e-8 * std::max(1.0, norm(an)));
        }
    }
}

TEST_CASE("sampled monotonicity and Lipschitz continuity of sigma") {
    Rng rng(23);
    for (const Nonlinearity& nl : {make_convex_energy(), make_forchheimer(0.2, 20.0, 1e-2)}) {
        const double radius = nl.kind == NonlinearityKind::forchheimer ? nl.grad_bound : 1e3;
        int violations = 0;
        for (int i = 0; i < 10000; ++i) {
            const Vec2 xi = random_dir(rng, radius);
            const Vec2 zeta = random_dir(rng, radius);
            const Vec2 ds = nl.sigma(xi) - nl.sigma(zeta);
            const Vec2 dxi = xi - zeta;
            const double slack = 1e-12 * std::max(1.0, norm_sq(dxi));
            if (dot(ds, dxi) < nl.lambda1 * norm_sq(dxi) - slack) ++violations;
            if (norm(ds) > nl.lambda2 * norm(dxi) + slack) ++violations;
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("compute_weights per scheme") {
    SUBCASE("emphasized gradient at (2, 3): w1^2 = b = 9/2") {
        const WeightedScheme ws = compute_weights(SchemeKind::emphasized_gradient, 2.0, 3.0);
        CHECK(ws.w1_sq() == doctest::Approx(4.5).epsilon(1e-15));
        CHECK(ws.a == 1.0);
        CHECK(ws.b == doctest::Approx(4.5).epsilon(1e-15));
    }
    SUBCASE("emphasized gradient at Forchheimer constants") {
        const Nonlinearity forch = make_forchheimer(0.2, 20.0, 1e-2);
        CHECK(forch.lambda2 == doctest::Approx(5.0));
        CHECK(forch.lambda1 == doctest::Approx(1.1835).epsilon(1e-4));
        const WeightedScheme ws = compute_weights(SchemeKind::emphasized_gradient, forch.lambda1, forch.lambda2);
        CHECK(std::abs(ws.w1_sq() - 35.6969) < 1e-3);
        CHECK(std::abs(ws.b - 21.1237) < 1e-3);
    }
    SUBCASE("split at (2, 3): (w1^2, a, b) = (9, 2, 9)") {
        const WeightedScheme ws = compute_weights(SchemeKind::split, 2.0, 3.0);
        CHECK(ws.w1_sq() == doctest::Approx(9.0).epsilon(1e-14));
        CHECK(ws.a == 2.0);
        CHECK(ws.b == doctest::Approx(9.0).epsilon(1e-14));
    }
    SUBCASE("linear identity: emphasized weights are (2, 1, 1)") {
        const WeightedScheme ws = compute_weights(SchemeKind::emphasized_gradient, 1.0, 1.0);
        CHECK(ws.w1_sq() == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(ws.a == 1.0);
        CHECK(ws.b == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("balanced and downscaled scale factors") {
        const WeightedScheme bal = compute_weights(SchemeKind::balanced, 2.0, 3.0);
        CHECK(bal.a == doctest::Approx(std::sqrt(2.0) / 3.0));
        CHECK(bal.b == doctest::Approx(3.0 / std::sqrt(2.0)));
        CHECK(bal.w1_sq() == doctest::Approx(2.0 * 3.0 / std::pow(2.0, 1.5)));
        const WeightedScheme down = compute_weights(SchemeKind::downscaled_flux, 2.0, 3.0);
        CHECK(down.a == doctest::Approx(2.0 / 9.0));
        CHECK(down.b == doctest::Approx(1.0));
        CHECK(down.w1_sq() == doctest::Approx(1.0));
    }
    SUBCASE("invalid bounds rejected") {
        CHECK_THROWS_AS(compute_weights(SchemeKind::split, -1.0, 2.0), std::invalid_argument);
        CHECK_THROWS_AS(compute_weights(SchemeKind::split, 3.0, 2.0), std::invalid_argument);
        CHECK_THROWS_AS(compute_weights(SchemeKind::split, 0.0, 2.0), std::invalid_argument);
    }
}

TEST_CASE("contraction constants") {
    SUBCASE("emphasized gradient at (2, 3)") {
        const ContractionConstants cc = contraction_constants(SchemeKind::emphasized_gradient, 2.0, 3.0);
        CHECK(cc.alpha_ls == doctest::Approx(1.0 / 18.0).epsilon(1e-14));
        CHECK(cc.l_ls == doctest::Approx(8.0).epsilon(1e-14));
        CHECK(cc.delta_star == doctest::Approx(1.0 / 576.0).epsilon(1e-14));
        CHECK(cc.delta_in_range(1e-3));
        CHECK_FALSE(cc.delta_in_range(1.0));
    }
    SUBCASE("rho at alpha = L = 1, delta = 1 vanishes") {
        ContractionConstants cc;
        cc.alpha_ls = 1.0;
        cc.l_ls = 1.0;
        cc.delta_star = 2.0;
        CHECK(cc.rho_z(1.0) == 0.0);
    }
    SUBCASE("rho below one inside the guaranteed range") {
        for (SchemeKind sk : {SchemeKind::emphasized_gradient, SchemeKind::balanced,
                              SchemeKind::downscaled_flux, SchemeKind::split}) {
            const ContractionConstants cc = contraction_constants(sk, 2.0, 3.0);
            CHECK(cc.alpha_ls > 0.0);
            CHECK(cc.alpha_ls <= cc.l_ls);
            for (double f : {0.1, 0.5, 0.9}) {
                const double r = cc.rho_z(f * cc.delta_star);
                CHECK(r > 0.0);
                CHECK(r < 1.0);
            }
        }
    }
    SUBCASE("balanced constants evaluate the displayed minimum") {
        const ContractionConstants cc = contraction_constants(SchemeKind::balanced, 2.0, 3.0);
        const double alpha_w = std::min({0.5, 3.0 / std::sqrt(2.0), std::pow(2.0, 1.5) / 12.0});
        CHECK(cc.alpha_ls == doctest::Approx(0.5 * alpha_w).epsilon(1e-14));
    }
}
