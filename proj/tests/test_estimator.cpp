#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zlsfem/benchmarks.hpp"
#include "zlsfem/driver.hpp"
#include "zlsfem/estimator.hpp"
#include "zlsfem/rng.hpp"

#include <numeric>

using namespace zlsfem;

namespace {

DiscreteSolution random_solution(const Mesh& m, const DofMap& dof, Rng& rng, double scale = 1.0) {
    DiscreteSolution s = zero_solution(m, dof);
    for (double& c : s.rt) c = rng.uniform(-scale, scale);
    for (double& c : s.s1) c = rng.uniform(-scale, scale);
    return s;
}

DiscreteSolution subtract(const DiscreteSolution& a, const DiscreteSolution& b) {
    DiscreteSolution d = a;
    for (std::size_t i = 0; i < d.rt.size(); ++i) d.rt[i] -= b.rt[i];
    for (std::size_t i = 0; i < d.s1.size(); ++i) d.s1[i] -= b.s1[i];
    return d;
}

} // namespace

TEST_CASE("eta_k") {
    Rng rng(61);
    MeshPtr m = refine_uniform(make_l_shape_initial(), 1);
    const DofMap dof = build_dof_map(*m);
    const ProblemSpec problem = make_convex_energy_problem();
    const WeightedScheme ws =
        compute_weights(SchemeKind::emphasized_gradient, problem.nl.lambda1, problem.nl.lambda2);

    SUBCASE("delta = 0 with current = prev vanishes") {
        const DiscreteSolution s = random_solution(*m, dof, rng);
        const EstimatorReport rep = eta_k(*m, dof, ws, problem.c_f, 0.0, s, s, problem);
        CHECK(rep.global() < 1e-14);
    }
    SUBCASE("global squared value is the sum of the locals") {
        const DiscreteSolution prev = random_solution(*m, dof, rng);
        const DiscreteSolution cur = random_solution(*m, dof, rng);
        const EstimatorReport rep = eta_k(*m, dof, ws, problem.c_f, 1.0, prev, cur, problem);
        const double sum = std::accumulate(rep.local2.begin(), rep.local2.end(), 0.0);
        CHECK(rep.total2 == doctest::Approx(sum).epsilon(1e-12));
        for (double v : rep.local2) CHECK(v >= 0.0);
    }
    SUBCASE("minimality: perturbations never decrease the step functional") {
        const SparseSpdSystem sys = assemble_system(*m, dof, ws, problem.c_f);
        const Factorization fact = factorize(sys);
        const DiscreteSolution prev = random_solution(*m, dof, rng, 0.2);
        const DiscreteSolution cur =
            zarantonello_step(*m, dof, fact, ws, problem.c_f, 1.0, prev, problem);
        const double z_min = eta_k(*m, dof, ws, problem.c_f, 1.0, prev, cur, problem).total2;
        for (int i = 0; i < 100; ++i) {
            DiscreteSolution q = cur;
            DiscreteSolution y = zero_solution(*m, dof);
            for (std::size_t j = 0; j < q.rt.size(); ++j) q.rt[j] += (y.rt[j] = 0.3 * rng.uniform(-1, 1));
            for (std::size_t j = 0; j < q.s1.size(); ++j) q.s1[j] += (y.s1[j] = 0.3 * rng.uniform(-1, 1));
            const double z_q = eta_k(*m, dof, ws, problem.c_f, 1.0, prev, q, problem).total2;
            CHECK(z_q >= z_min - 1e-12 * std::max(1.0, z_q));
            // Galerkin orthogonality: the excess is the squared A-norm
            const double yay = sys.mat.quad_form(to_vector(y));
            CHECK(z_q - z_min == doctest::Approx(yay).epsilon(1e-9));
        }
    }
}

TEST_CASE("mu_k") {
    Rng rng(67);
    MeshPtr m = refine_uniform(make_l_shape_initial(), 1);
    const DofMap dof = build_dof_map(*m);
    const WeightedScheme ws = compute_weights(SchemeKind::emphasized_gradient, 2.0, 3.0);
    const double c_f = c_f_l_shape;

    SUBCASE("current = prev vanishes") {
        const DiscreteSolution s = random_solution(*m, dof, rng);
        CHECK(mu_k(*m, dof, ws, c_f, s, s).global() == 0.0);
    }
    SUBCASE("prev = 0 gives the quadratic form of the current iterate") {
        const SparseSpdSystem sys = assemble_system(*m, dof, ws, c_f);
        for (int i = 0; i < 20; ++i) {
            const DiscreteSolution cur = random_solution(*m, dof, rng);
            const double mu2 = mu_k(*m, dof, ws, c_f, zero_solution(*m, dof), cur).total2;
            CHECK(mu2 == doctest::Approx(sys.mat.quad_form(to_vector(cur))).epsilon(1e-10));
        }
    }
    SUBCASE("norm property: two-leg path bounds the direct distance") {
        for (int i = 0; i < 50; ++i) {
            const DiscreteSolution a = random_solution(*m, dof, rng);
            const DiscreteSolution b = random_solution(*m, dof, rng);
            const DiscreteSolution c = random_solution(*m, dof, rng);
            const double ab = mu_k(*m, dof, ws, c_f, a, b).global();
            const double bc = mu_k(*m, dof, ws, c_f, b, c).global();
            const double ac = mu_k(*m, dof, ws, c_f, a, c).global();
            CHECK(ac <= ab + bc + 1e-12 * std::max(1.0, ac));
        }
    }
}

TEST_CASE("nonlinear functional") {
    SUBCASE("zero solution with f1 = 1 on the L-shape: N^2 = C_F^2 |Omega|") {
        MeshPtr m = make_l_shape_initial();
        const DofMap dof = build_dof_map(*m);
        const ProblemSpec problem = make_convex_energy_problem();
        const EstimatorReport rep =
            nonlinear_functional(*m, dof, problem, problem.c_f, zero_solution(*m, dof));
        CHECK(rep.total2 == doctest::Approx(problem.c_f * problem.c_f * 3.0).epsilon(1e-13));
    }
    SUBCASE("identity flux with matching manufactured data vanishes") {
        Rng rng(71);
        MeshPtr m = refine_uniform(make_unit_square_initial(), 2);
        const DofMap dofm = build_dof_map(*m);
        DiscreteSolution sol = zero_solution(*m, dofm);
        for (double& c : sol.rt) c = rng.uniform(-1, 1);
        // u = 0, p random: choose f1 = -div p elementwise, f2 = -p pointwise
        const Mesh* mp = m.get();
        const DofMap* dp = &dofm;
        const DiscreteSolution* sp = &sol;
        ProblemSpec problem;
        problem.domain = Domain::unit_square;
        problem.nl = make_linear_identity();
        problem.c_f = c_f_unit_square;
        problem.f1 = ScalarField::analytic(
            [=](Vec2 x) { return -div_rt0(*mp, *dp, locate_triangle(*mp, x), sp->rt); });
        problem.f2 = VectorField::analytic(
            [=](Vec2 x) { return -1.0 * eval_rt0(*mp, *dp, locate_triangle(*mp, x), sp->rt, x); });
        const EstimatorReport rep = nonlinear_functional(*m, dofm, problem, problem.c_f, sol);
        // the squared functional cancels O(10)-sized terms, so machine
        // precision leaves ~1e-15 in N^2
        CHECK(rep.total2 < 1e-12);
    }
}

TEST_CASE("linear estimator") {
    Rng rng(73);
    MeshPtr m = refine_uniform(make_unit_square_initial(), 2);
    const DofMap dof = build_dof_map(*m);
    const WeightedScheme ws = compute_weights(SchemeKind::emphasized_gradient, 1.0, 1.0);
    const double c_f = c_f_unit_square;

    SUBCASE("zero data and zero iterate vanish") {
        const EstimatorReport rep =
            linear_eta(*m, dof, ws, c_f, ScalarField::zero(), VectorField::zero(), zero_solution(*m, dof));
        CHECK(rep.global() == 0.0);
    }
    SUBCASE("global squared value equals the functional by independent quadrature") {
        // polynomial data (degree 1) keeps both computations exact
        const ScalarField g1 = ScalarField::analytic([](Vec2 x) { return 1.0 + 2.0 * x.x - x.y; });
        const VectorField g2 = VectorField::analytic([](Vec2 x) { return Vec2{x.y, -0.5 * x.x}; });
        const DiscreteSolution sol = random_solution(*m, dof, rng);
        const EstimatorReport rep = linear_eta(*m, dof, ws, c_f, g1, g2, sol);
        // independent elementwise quadrature with the degree-3 rule
        double oracle = 0.0;
        const QuadRule& q = quadrature_rule(3);
        for (std::size_t t = 0; t < m->tris.size(); ++t) {
            const TriGeom g = tri_geom(*m, t);
            const double divq = div_rt0(*m, dof, t, sol.rt);
            const Vec2 grad = grad_s1(*m, dof, t, sol.s1);
            for (const auto& qp : q.points) {
                const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
                const double w = qp.w * 2.0 * g.area;
                const double r1 = g1.eval(x) + ws.w1 * divq;
                const Vec2 r2 = g2.eval(x) + ws.a * eval_rt0(*m, dof, t, sol.rt, x) - ws.b * grad;
                oracle += w * (c_f * c_f * r1 * r1 + norm_sq(r2));
            }
        }
        CHECK(rep.total2 == doctest::Approx(oracle).epsilon(1e-12));
    }
    SUBCASE("estimator tracks the error against a much finer reference") {
        // manufactured linear problem; the reference lives two uniform
        // refinement levels (4 NVB passes) below the test mesh
        const ProblemSpec lin = make_linear_manufactured_problem();
        const ScalarField g1 =
            ScalarField::analytic([&, w1 = ws.w1](Vec2 x) { return w1 * lin.f1.eval(x); });
        MeshPtr coarse = refine_uniform(make_unit_square_initial(), 4);
        const DofMap cdof = build_dof_map(*coarse);
        const SparseSpdSystem csys = assemble_system(*coarse, cdof, ws, c_f);
        const Factorization cfact = factorize(csys);
        const DiscreteSolution csol =
            from_vector(*coarse, cdof, cfact.solve(assemble_linear_ls_rhs(*coarse, cdof, ws, c_f, g1,
                                                                          VectorField::zero())));
        const double eta = linear_eta(*coarse, cdof, ws, c_f, g1, VectorField::zero(), csol).global();

        MeshPtr fine = refine_uniform(coarse, 4);
        const DofMap fdof = build_dof_map(*fine);
        const SparseSpdSystem fsys = assemble_system(*fine, fdof, ws, c_f);
        const std::vector<Vec2> coords = dof_coordinates(*fine, fdof);
        const Factorization ffact = factorize(fsys, &coords);
        const DiscreteSolution fsol =
            from_vector(*fine, fdof, ffact.solve(assemble_linear_ls_rhs(*fine, fdof, ws, c_f, g1,
                                                                        VectorField::zero())));
        const DiscreteSolution diff = subtract(fsol, prolongate(csol, coarse, fine, fdof));
        const double err = std::sqrt(a_norm_sq(*fine, fdof, ws, c_f, diff));
        CHECK(std::abs(err - eta) <= 0.05 * eta);
    }
}

TEST_CASE("bulk marking") {
    SUBCASE("prefix example") {
        const MarkedSet got = doerfler_mark({0.5, 0.3, 0.15, 0.05}, 0.6);
        REQUIRE(got.indices.size() == 2);
        CHECK(got.indices[0] == 0);
        CHECK(got.indices[1] == 1);
    }
    SUBCASE("theta = 1 marks every element with nonzero indicator") {
        const MarkedSet got = doerfler_mark({0.25, 0.5, 0.25}, 1.0);
        CHECK(got.indices.size() == 3);
    }
    SUBCASE("all-zero indicators mark nothing") {
        const MarkedSet got = doerfler_mark({0.0, 0.0}, 0.5);
        CHECK(got.indices.empty());
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(doerfler_mark({}, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(doerfler_mark({1.0}, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(doerfler_mark({1.0}, 1.5), std::invalid_argument);
    }
    SUBCASE("cardinality matches the exhaustive subset oracle") {
        Rng rng(79);
        for (int inst = 0; inst < 150; ++inst) {
            const std::size_t n = 2 + rng.index(11);
            std::vector<double> ind(n);
            for (double& v : ind) v = rng.index(4) == 0 ? 0.25 : rng.uniform();
            const double theta = 0.1 + 0.8 * rng.uniform();
            const MarkedSet got = doerfler_mark(ind, theta);
            const double total = std::accumulate(ind.begin(), ind.end(), 0.0);
            double got_sum = 0.0;
            for (std::int32_t i : got.indices) got_sum += ind[i];
            REQUIRE(got_sum >= theta * total - 1e-15);
            // brute force minimal cardinality
            std::size_t best = n + 1;
            for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                double s = 0.0;
                std::size_t card = 0;
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (1u << i)) {
                        s += ind[i];
                        ++card;
                    }
                if (s >= theta * total) best = std::min(best, card);
            }
            REQUIRE(got.indices.size() == best);
        }
    }
    SUBCASE("enlarging theta never shrinks the marked set") {
        Rng rng(83);
        for (int inst = 0; inst < 50; ++inst) {
            std::vector<double> ind(20);
            for (double& v : ind) v = rng.uniform();
            std::size_t prev = 0;
            for (double theta : {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
                const std::size_t card = doerfler_mark(ind, theta).indices.size();
                CHECK(card >= prev);
                prev = card;
            }
        }
    }
    SUBCASE("ties break by ascending element index") {
        const MarkedSet got = doerfler_mark({0.25, 0.25, 0.25, 0.25}, 0.5);
        REQUIRE(got.indices.size() == 2);
        CHECK(got.indices[0] == 0);
        CHECK(got.indices[1] == 1);
    }
}

TEST_CASE("reliability and efficiency against a fine reference") {
    // short adaptive run; the reference solution lives two uniform levels
    // below the final mesh and is iterated close to the nonlinear limit
    const ProblemSpec problem = make_convex_energy_problem();
    const WeightedScheme ws =
        compute_weights(SchemeKind::emphasized_gradient, problem.nl.lambda1, problem.nl.lambda2);
    const double c_f = problem.c_f;

    struct Snapshot {
        MeshPtr mesh;
        DiscreteSolution prev, cur;
    };
    std::vector<Snapshot> accepted;

    MeshPtr mesh = make_l_shape_initial();
    DofMap dof = build_dof_map(*mesh);
    DiscreteSolution prev = zero_solution(*mesh, dof);
    for (int k = 1; k <= 14; ++k) {
        const double threshold = std::pow(0.9, k);
        for (;;) {
            const SparseSpdSystem sys = assemble_system(*mesh, dof, ws, c_f);
            const Factorization fact = factorize(sys);
            const DiscreteSolution cur = zarantonello_step(*mesh, dof, fact, ws, c_f, 1.0, prev, problem);
            const EstimatorReport eta = eta_k(*mesh, dof, ws, c_f, 1.0, prev, cur, problem);
            if (eta.global() <= threshold) {
                accepted.push_back({mesh, prev, cur});
                prev = cur;
                break;
            }
            const MarkedSet marked = doerfler_mark(eta.local2, 0.3);
            MeshPtr fine = refine_nvb(mesh, marked);
            const DofMap fdof = build_dof_map(*fine);
            prev = prolongate(prev, mesh, fine, fdof);
            mesh = fine;
            dof = fdof;
        }
    }

    // reference: 2 uniform levels finer than the final mesh, iterated deep
    MeshPtr ref_mesh = refine_uniform(mesh, 4);
    const DofMap ref_dof = build_dof_map(*ref_mesh);
    const SparseSpdSystem ref_sys = assemble_system(*ref_mesh, ref_dof, ws, c_f);
    const std::vector<Vec2> coords = dof_coordinates(*ref_mesh, ref_dof);
    const Factorization ref_fact = factorize(ref_sys, &coords);
    DiscreteSolution ref = prolongate(prev, mesh, ref_mesh, ref_dof);
    for (int i = 0; i < 80; ++i)
        ref = zarantonello_step(*ref_mesh, ref_dof, ref_fact, ws, c_f, 1.0, ref, problem);

    double worst_rel = 0.0, worst_eff = 0.0;
    for (std::size_t i = 3; i < accepted.size(); ++i) {
        const Snapshot& s = accepted[i];
        const DofMap sdof = build_dof_map(*s.mesh);
        const double eta = eta_k(*s.mesh, sdof, ws, c_f, 1.0, s.prev, s.cur, problem).global();
        const double mu = mu_k(*s.mesh, sdof, ws, c_f, s.prev, s.cur).global();
        const DiscreteSolution cur_ref = prolongate(s.cur, s.mesh, ref_mesh, ref_dof);
        const DiscreteSolution prev_ref = prolongate(s.prev, s.mesh, ref_mesh, ref_dof);
        const double err_cur = std::sqrt(a_norm_sq(*ref_mesh, ref_dof, ws, c_f, subtract(ref, cur_ref)));
        const double err_prev = std::sqrt(a_norm_sq(*ref_mesh, ref_dof, ws, c_f, subtract(ref, prev_ref)));
        worst_rel = std::max(worst_rel, err_cur / (eta + mu));
        worst_eff = std::max(worst_eff, (eta + mu) / err_prev);
    }
    MESSAGE("reliability constant <= ", worst_rel, ", efficiency constant <= ", worst_eff);
    CHECK(worst_rel < 50.0);
    CHECK(worst_eff < 50.0);
    CHECK(worst_rel > 0.0);
    CHECK(worst_eff > 0.0);
}
