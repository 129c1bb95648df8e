#pragma once

#include <cmath>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "zlsfem/benchmarks.hpp"
#include "zlsfem/rng.hpp"

namespace zlsfem {

enum class SelfcheckFault { none, halve_w1, reverse_mark_ties };

inline SelfcheckFault fault_from_name(const std::string& s) {
    if (s.empty() || s == "none") return SelfcheckFault::none;
    if (s == "halve-w1") return SelfcheckFault::halve_w1;
    if (s == "reverse-mark-ties") return SelfcheckFault::reverse_mark_ties;
    throw std::invalid_argument("unknown fault: " + s);
}

namespace selfcheck_detail {

inline DiscreteSolution random_solution(const Mesh& m, const DofMap& dof, Rng& rng, double scale = 1.0) {
    DiscreteSolution s = zero_solution(m, dof);
    for (double& c : s.rt) c = rng.uniform(-scale, scale);
    for (double& c : s.s1) c = rng.uniform(-scale, scale);
    return s;
}

// cap |grad u_h| by rescaling the S1 part (Forchheimer bounds are local)
inline void cap_gradient(const Mesh& m, const DofMap& dof, DiscreteSolution& s, double bound) {
    const double g = grad_inf_norm(m, dof, s);
    if (g > bound)
        for (double& c : s.s1) c *= 0.95 * bound / g;
}

struct Check {
    std::ostream& log;
    int failures = 0;

    void expect(bool ok, const std::string& what) {
        log << (ok ? "  ok    " : "  FAIL  ") << what << '\n';
        if (!ok) ++failures;
    }
};

// second implementation of the marking rule for the oracle comparison:
// repeated maximum selection with explicit tie handling
inline std::vector<std::int32_t> select_mark_reference(const std::vector<double>& ind2, double theta) {
    const std::size_t n = ind2.size();
    double total = 0.0;
    for (double v : ind2) total += v;
    const double target = theta * total;
    std::vector<char> taken(n, 0);
    std::vector<std::int32_t> out;
    double acc = 0.0;
    while (acc < target && out.size() < n) {
        std::int32_t best = -1;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            if (best < 0 || ind2[i] > ind2[best]) best = static_cast<std::int32_t>(i);
            // ties keep the smaller index, already guaranteed by the scan order
        }
        taken[best] = 1;
        out.push_back(best);
        acc += ind2[best];
    }
    return out;
}

// brute-force minimal cardinality over all subsets (n <= 20)
inline std::size_t min_cardinality_brute_force(const std::vector<double>& ind2, double theta) {
    const std::size_t n = ind2.size();
    double total = 0.0;
    for (double v : ind2) total += v;
    const double target = theta * total;
    std::size_t best = n + 1;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double s = 0.0;
        std::size_t card = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                s += ind2[i];
                ++card;
            }
        if (s >= target) best = std::min(best, card);
    }
    return best;
}

} // namespace selfcheck_detail

// Fast invariant suite: mesh kernel fuzz, weight and contraction constants,
// nonlinearity bounds, fundamental equivalence, operator monotonicity and
// Lipschitz bounds, step-functional minimality, and the marking oracle.
// Returns the number of failed checks. The fault argument deliberately
// corrupts one ingredient so the corresponding check must fail.
inline int selfcheck(SelfcheckFault fault = SelfcheckFault::none, std::ostream& log = std::cout,
                     std::uint64_t seed = 20240811) {
    using namespace selfcheck_detail;
    Check ck{log};
    Rng rng(seed);

    // --- mesh kernel -------------------------------------------------------
    {
        double floor_angle = 1e9;
        for (MeshPtr m : {make_unit_square_initial(), make_l_shape_initial()})
            floor_angle = std::min(floor_angle, min_angle(*refine_uniform(m, 3)));

        bool conforming = true, nested = true, angle_ok = true;
        for (MeshPtr m0 : {make_unit_square_initial(), make_l_shape_initial()}) {
            MeshPtr m = m0;
            for (int step = 0; step < 120; ++step) {
                MarkedSet marks;
                const std::size_t nm = std::min<std::size_t>(1 + rng.index(3), m->tris.size());
                for (std::size_t i = 0; i < nm; ++i) {
                    const auto t = static_cast<std::int32_t>(rng.index(m->tris.size()));
                    bool dup = false;
                    for (std::int32_t j : marks.indices) dup |= (j == t);
                    if (!dup) marks.indices.push_back(t);
                }
                MeshPtr fine = refine_nvb(m, marks);
                if (!check_conformity(*fine).ok()) conforming = false;
                // nestedness: children areas sum to the parent area
                std::vector<double> child_area(m->tris.size(), 0.0);
                for (std::size_t t = 0; t < fine->tris.size(); ++t)
                    child_area[fine->parent_tri[t]] += tri_area(*fine, t);
                for (std::size_t t = 0; t < m->tris.size(); ++t)
                    if (std::abs(child_area[t] - tri_area(*m, t)) > 1e-12 * tri_area(*m, t))
                        nested = false;
                if (min_angle(*fine) < floor_angle - 1e-9) angle_ok = false;
                m = fine;
            }
        }
        ck.expect(conforming, "mesh fuzz: conformity preserved");
        ck.expect(nested, "mesh fuzz: children partition their parent");
        ck.expect(angle_ok, "mesh fuzz: min angle never below the uniform floor");
    }

    // --- weights and contraction constants ---------------------------------
    {
        const WeightedScheme e23 = compute_weights(SchemeKind::emphasized_gradient, 2.0, 3.0);
        ck.expect(std::abs(e23.w1_sq() - 4.5) < 1e-14 && std::abs(e23.b - 4.5) < 1e-14 && e23.a == 1.0,
                  "weights: emphasized-gradient at (2,3) are (w1^2, a, b) = (9/2, 1, 9/2)");
        const ContractionConstants cc = contraction_constants(SchemeKind::emphasized_gradient, 2.0, 3.0);
        ck.expect(std::abs(cc.delta_star - 1.0 / 576.0) < 1e-15, "constants: delta* = 1/576 at (2,3)");
        const Nonlinearity forch = make_forchheimer(0.2, 20.0, 1e-2);
        const WeightedScheme f = compute_weights(SchemeKind::emphasized_gradient, forch.lambda1, forch.lambda2);
        ck.expect(std::abs(f.w1_sq() - 35.6969) < 1e-3 && std::abs(f.b - 21.1237) < 1e-3,
                  "weights: Forchheimer values match to 1e-3");
        const WeightedScheme s23 = compute_weights(SchemeKind::split, 2.0, 3.0);
        ck.expect(std::abs(s23.w1_sq() - 9.0) < 1e-13 && s23.a == 2.0 && std::abs(s23.b - 9.0) < 1e-13,
                  "weights: split at (2,3) are (9, 2, 9)");
    }

    // --- nonlinearity bounds ------------------------------------------------
    {
        for (const Nonlinearity& nl : {make_convex_energy(), make_forchheimer(0.2, 20.0, 1e-2)}) {
            const double radius = nl.kind == NonlinearityKind::forchheimer ? nl.grad_bound : 1e3;
            bool ok = true;
            for (int i = 0; i < 10000 && ok; ++i) {
                const double r = radius * rng.uniform();
                const double ang = rng.uniform(0.0, 6.283185307179586);
                const Vec2 xi{r * std::cos(ang), r * std::sin(ang)};
                const auto ev = sym_eigenvalues(nl.dsigma(xi));
                ok = ev[0] >= nl.lambda1 - 1e-9 && ev[1] <= nl.lambda2 + 1e-9;
            }
            ck.expect(ok, std::string("nonlinearity: Dsigma eigenvalues within [L1, L2] (") +
                              (nl.kind == NonlinearityKind::forchheimer ? "forchheimer" : "convex-energy") +
                              ")");
        }
    }

    // --- fundamental equivalence -------------------------------------------
    {
        int violations = 0;
        for (MeshPtr mesh : {refine_uniform(make_unit_square_initial(), 3),
                             refine_uniform(make_l_shape_initial(), 2)}) {
            const DofMap dof = build_dof_map(*mesh);
            for (SchemeKind sk : {SchemeKind::emphasized_gradient, SchemeKind::balanced,
                                  SchemeKind::downscaled_flux, SchemeKind::split}) {
                const WeightedScheme ws = compute_weights(sk, 2.0, 3.0);
                WeightedScheme ws_mat = ws;
                if (fault == SelfcheckFault::halve_w1) {
                    ws_mat.w1 *= 0.5;
                    ws_mat.w1sq *= 0.25;
                }
                const SparseSpdSystem sys = assemble_system(*mesh, dof, ws_mat, c_f_l_shape);
                const double lower = equivalence_lower_constant(ws);
                for (int i = 0; i < 100; ++i) {
                    const DiscreteSolution s = random_solution(*mesh, dof, rng);
                    const double xax = sys.mat.quad_form(to_vector(s));
                    const double om = omega_norm_sq(*mesh, dof, ws, c_f_l_shape, s);
                    const double slack = 1e-10 * std::max(1.0, om);
                    if (xax < lower * om - slack || xax > 2.0 * om + slack) ++violations;
                }
            }
        }
        ck.expect(violations == 0, "fundamental equivalence: two-sided bounds hold (0 violations)");
    }

    // --- monotonicity / Lipschitz continuity of the operator ----------------
    {
        MeshPtr mesh = refine_uniform(make_l_shape_initial(), 2);
        const DofMap dof = build_dof_map(*mesh);
        const Nonlinearity nl = make_convex_energy();
        int violations = 0;
        for (SchemeKind sk : {SchemeKind::emphasized_gradient, SchemeKind::balanced,
                              SchemeKind::downscaled_flux, SchemeKind::split}) {
            const WeightedScheme ws = compute_weights(sk, nl.lambda1, nl.lambda2);
            const ContractionConstants cc = contraction_constants(sk, nl.lambda1, nl.lambda2);
            for (int i = 0; i < 50; ++i) {
                const DiscreteSolution x = random_solution(*mesh, dof, rng);
                const DiscreteSolution y = random_solution(*mesh, dof, rng);
                const DiscreteSolution z = random_solution(*mesh, dof, rng);
                const std::vector<double> bx = assemble_b_load(*mesh, dof, ws, c_f_l_shape, nl, x);
                const std::vector<double> by = assemble_b_load(*mesh, dof, ws, c_f_l_shape, nl, y);
                DiscreteSolution diff = x;
                for (std::size_t j = 0; j < diff.rt.size(); ++j) diff.rt[j] -= y.rt[j];
                for (std::size_t j = 0; j < diff.s1.size(); ++j) diff.s1[j] -= y.s1[j];
                const std::vector<double> dv = to_vector(diff);
                const std::vector<double> zv = to_vector(z);
                double pair_d = 0.0, pair_z = 0.0;
                for (std::size_t j = 0; j < dv.size(); ++j) {
                    pair_d += (bx[j] - by[j]) * dv[j];
                    pair_z += (bx[j] - by[j]) * zv[j];
                }
                const double nd = a_norm_sq(*mesh, dof, ws, c_f_l_shape, diff);
                const double nz = a_norm_sq(*mesh, dof, ws, c_f_l_shape, z);
                const double slack = 1e-10 * std::max(1.0, nd);
                if (pair_d < cc.alpha_ls * nd - slack) ++violations;
                if (std::abs(pair_z) > cc.l_ls * std::sqrt(nd) * std::sqrt(nz) + slack) ++violations;
            }
        }
        ck.expect(violations == 0, "operator bounds: alpha_LS and L_LS hold (0 violations)");
    }

    // --- step-functional minimality (Pythagoras) ----------------------------
    {
        const ProblemSpec problem = make_convex_energy_problem();
        AlgorithmParams params;
        params.max_total_dofs = 600;
        params.max_outer_iters = 6;
        MeshPtr mesh = make_l_shape_initial();
        const WeightedScheme ws = compute_weights(params.scheme, problem.nl.lambda1, problem.nl.lambda2);
        bool ok = true;
        DofMap dof = build_dof_map(*mesh);
        DiscreteSolution prev = zero_solution(*mesh, dof);
        for (int k = 1; k <= 4; ++k) {
            SparseSpdSystem sys = assemble_system(*mesh, dof, ws, problem.c_f);
            const Factorization fact = factorize(sys);
            const DiscreteSolution cur =
                zarantonello_step(*mesh, dof, fact, ws, problem.c_f, params.delta, prev, problem);
            const double z_min =
                eta_k(*mesh, dof, ws, problem.c_f, params.delta, prev, cur, problem).total2;
            for (int i = 0; i < 5; ++i) {
                DiscreteSolution q = cur;
                DiscreteSolution y = zero_solution(*mesh, dof);
                for (std::size_t j = 0; j < q.rt.size(); ++j) {
                    y.rt[j] = 0.1 * rng.uniform(-1.0, 1.0);
                    q.rt[j] += y.rt[j];
                }
                for (std::size_t j = 0; j < q.s1.size(); ++j) {
                    y.s1[j] = 0.1 * rng.uniform(-1.0, 1.0);
                    q.s1[j] += y.s1[j];
                }
                const double z_q = eta_k(*mesh, dof, ws, problem.c_f, params.delta, prev, q, problem).total2;
                const double yay = sys.mat.quad_form(to_vector(y));
                const double ref = std::max({z_q, yay, 1e-30});
                if (std::abs(z_q - z_min - yay) > 1e-9 * ref) ok = false;
                if (z_q < z_min - 1e-12 * ref) ok = false;
            }
            prev = cur;
        }
        ck.expect(ok, "minimality: Z_k(q) - Z_k(x*) equals the squared A-norm of the difference");
    }

    // --- bulk marking vs oracle ---------------------------------------------
    {
        bool ok = true;
        for (int inst = 0; inst < 200 && ok; ++inst) {
            const std::size_t n = 2 + rng.index(11);
            std::vector<double> ind2(n);
            for (double& v : ind2) v = rng.index(4) == 0 ? 0.25 : rng.uniform(); // seeded ties
            const double theta = 0.15 + 0.7 * rng.uniform();
            const DoerflerTieBreak tie = fault == SelfcheckFault::reverse_mark_ties
                                             ? DoerflerTieBreak::descending_index
                                             : DoerflerTieBreak::ascending_index;
            const MarkedSet got = doerfler_mark(ind2, theta, tie);
            const std::vector<std::int32_t> want = select_mark_reference(ind2, theta);
            if (got.indices.size() != min_cardinality_brute_force(ind2, theta)) ok = false;
            std::vector<std::int32_t> a = got.indices, b = want;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (a != b) ok = false;
        }
        ck.expect(ok, "marking: greedy set matches the exhaustive-subset oracle");
    }

    log << (ck.failures == 0 ? "selfcheck passed" : "selfcheck FAILED") << " (" << ck.failures
        << " failing checks)\n";
    return ck.failures;
}

} // namespace zlsfem
