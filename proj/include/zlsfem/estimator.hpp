#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zlsfem/assembly.hpp"
#include "zlsfem/fields.hpp"
#include "zlsfem/mesh.hpp"
#include "zlsfem/parallel.hpp"

namespace zlsfem {

enum class EstimatorKind { linear_eta, eta_k, mu_k, nonlinear_n };

struct EstimatorReport {
    EstimatorKind kind = EstimatorKind::linear_eta;
    std::vector<double> local2; // per-element squared indicators
    double total2 = 0.0;

    double global() const { return std::sqrt(total2); }
};

namespace detail {

inline EstimatorReport reduce(EstimatorKind kind, std::vector<double>&& local2) {
    EstimatorReport rep;
    rep.kind = kind;
    rep.local2 = std::move(local2);
    rep.total2 = std::accumulate(rep.local2.begin(), rep.local2.end(), 0.0);
    return rep;
}

} // namespace detail

/******************************************************************************
Discretization error estimator of the linearization step,

  eta_k(T; q,v)^2 = w1^2 C_F^2 || div(q - p') + delta [f1 + div p'] ||_T^2
                  + || a(q - p') - b grad(v - u')
                      + delta [f2 + p' - sigma(grad u')] ||_T^2,

whose global value is the Zarantonello least-squares functional Z_k(q, v).
******************************************************************************/
inline EstimatorReport eta_k(const Mesh& m, const DofMap& dof, const WeightedScheme& ws, double c_f,
                             double delta, const DiscreteSolution& prev, const DiscreteSolution& current,
                             const ProblemSpec& problem) {
    detail::check_solution(m, dof, prev);
    detail::check_solution(m, dof, current);
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(4);
    std::vector<double> local2(m.tris.size());

    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const detail::PrevState ps = detail::prev_state(m, dof, problem.nl, prev, t);
        const double div_cur = div_rt0(m, dof, t, current.rt);
        const Vec2 grad_cur = grad_s1(m, dof, t, current.s1);

        // first residual: constant + delta f1
        const double c1 = div_cur - (1.0 - delta) * ps.div_prev;
        const auto [int_f1, int_f1_sq] = problem.f1.moments(g);
        const double res1 =
            c1 * c1 * g.area + 2.0 * c1 * delta * int_f1 + delta * delta * int_f1_sq;

        // second residual: affine + delta f2
        double res2 = 0.0;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            Vec2 r = ws.a * (detail::eval_rt_local(g, dof, t, current.rt, x) -
                             detail::eval_rt_local(g, dof, t, prev.rt, x)) -
                     ws.b * (grad_cur - ps.grad_prev) +
                     delta * (detail::eval_rt_local(g, dof, t, prev.rt, x) - ps.sigma_prev);
            if (!problem.f2.is_zero()) r += delta * problem.f2.eval(x);
            res2 += w * norm_sq(r);
        }
        local2[t] = w1sq_cf2 * res1 + res2;
    });
    return detail::reduce(EstimatorKind::eta_k, std::move(local2));
}

/******************************************************************************
Linearization error estimator,

  mu_k(T; q,v)^2 = w1^2 C_F^2 || div(q - p') ||_T^2
                 + || a(q - p') - b grad(v - u') ||_T^2,

whose global value equals ||| (q - p', v - u') |||_A^2 exactly.
******************************************************************************/
inline EstimatorReport mu_k(const Mesh& m, const DofMap& dof, const WeightedScheme& ws, double c_f,
                            const DiscreteSolution& prev, const DiscreteSolution& current) {
    detail::check_solution(m, dof, prev);
    detail::check_solution(m, dof, current);
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(2);
    std::vector<double> local2(m.tris.size());

    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const double ddiv = div_rt0(m, dof, t, current.rt) - div_rt0(m, dof, t, prev.rt);
        const Vec2 dgrad = grad_s1(m, dof, t, current.s1) - grad_s1(m, dof, t, prev.s1);
        double acc = w1sq_cf2 * ddiv * ddiv * g.area;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const Vec2 dp = detail::eval_rt_local(g, dof, t, current.rt, x) -
                            detail::eval_rt_local(g, dof, t, prev.rt, x);
            acc += qp.w * 2.0 * g.area * norm_sq(ws.a * dp - ws.b * dgrad);
        }
        local2[t] = acc;
    });
    return detail::reduce(EstimatorKind::mu_k, std::move(local2));
}

/******************************************************************************
Nonlinear least-squares functional

  N(f1, f2; p, u) = C_F^2 || f1 + div p ||^2 + || f2 + p - sigma(grad u) ||^2,

unweighted; sigma(grad u_h) is elementwise constant for m = 0, so the only
quadrature enters through the data fields.
******************************************************************************/
inline EstimatorReport nonlinear_functional(const Mesh& m, const DofMap& dof, const ProblemSpec& problem,
                                            double c_f, const DiscreteSolution& sol) {
    detail::check_solution(m, dof, sol);
    const double cf2 = c_f * c_f;
    const QuadRule& quad = quadrature_rule(4);
    std::vector<double> local2(m.tris.size());

    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const double divp = div_rt0(m, dof, t, sol.rt);
        const Vec2 sigma_u = problem.nl.sigma(grad_s1(m, dof, t, sol.s1));

        const auto [int_f1, int_f1_sq] = problem.f1.moments(g);
        const double res1 = divp * divp * g.area + 2.0 * divp * int_f1 + int_f1_sq;

        double res2 = 0.0;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            Vec2 r = detail::eval_rt_local(g, dof, t, sol.rt, x) - sigma_u;
            if (!problem.f2.is_zero()) r += problem.f2.eval(x);
            res2 += w * norm_sq(r);
        }
        local2[t] = cf2 * res1 + res2;
    });
    return detail::reduce(EstimatorKind::nonlinear_n, std::move(local2));
}

/******************************************************************************
Least-squares estimator of the linear problem,

  eta(T; q,v)^2 = C_F^2 || g1 + w1 div q ||_T^2 + || g2 + a q - b grad v ||_T^2;

its global squared value is the linear least-squares functional, which equals
||| (p* - q, u* - v) |||_A^2 for the exact linear minimizer (p*, u*).
******************************************************************************/
inline EstimatorReport linear_eta(const Mesh& m, const DofMap& dof, const WeightedScheme& ws, double c_f,
                                  const ScalarField& g1, const VectorField& g2,
                                  const DiscreteSolution& sol) {
    detail::check_solution(m, dof, sol);
    const double cf2 = c_f * c_f;
    const QuadRule& quad = quadrature_rule(4);
    std::vector<double> local2(m.tris.size());

    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const double divq = ws.w1 * div_rt0(m, dof, t, sol.rt);
        const Vec2 grad = grad_s1(m, dof, t, sol.s1);

        const auto [int_g1, int_g1_sq] = g1.moments(g);
        const double res1 = divq * divq * g.area + 2.0 * divq * int_g1 + int_g1_sq;

        double res2 = 0.0;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            Vec2 r = ws.a * detail::eval_rt_local(g, dof, t, sol.rt, x) - ws.b * grad;
            if (!g2.is_zero()) r += g2.eval(x);
            res2 += w * norm_sq(r);
        }
        local2[t] = cf2 * res1 + res2;
    });
    return detail::reduce(EstimatorKind::linear_eta, std::move(local2));
}

enum class DoerflerTieBreak { ascending_index, descending_index };

// Minimal-cardinality bulk marking: sort squared indicators descending (ties
// by ascending element index) and take the shortest prefix whose sum reaches
// theta * total.
inline MarkedSet doerfler_mark(const std::vector<double>& squared_indicators, double theta,
                               DoerflerTieBreak tie = DoerflerTieBreak::ascending_index) {
    if (squared_indicators.empty()) throw std::invalid_argument("doerfler_mark: empty indicator list");
    if (!(theta > 0.0) || !(theta <= 1.0)) throw std::invalid_argument("doerfler_mark: theta out of (0,1]");
    const std::size_t n = squared_indicators.size();
    std::vector<std::int32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
        const double va = squared_indicators[a], vb = squared_indicators[b];
        if (va != vb) return va > vb;
        return tie == DoerflerTieBreak::ascending_index ? a < b : a > b;
    });
    const double total = std::accumulate(squared_indicators.begin(), squared_indicators.end(), 0.0);
    const double target = theta * total;
    MarkedSet marked;
    double acc = 0.0;
    for (std::int32_t i : idx) {
        if (acc >= target) break;
        marked.indices.push_back(i);
        acc += squared_indicators[i];
    }
    return marked;
}

} // namespace zlsfem
