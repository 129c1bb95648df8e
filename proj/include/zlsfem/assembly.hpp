#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zlsfem/fields.hpp"
#include "zlsfem/fem_space.hpp"
#include "zlsfem/nonlinearity.hpp"
#include "zlsfem/parallel.hpp"
#include "zlsfem/quadrature.hpp"

namespace zlsfem {

struct Csr {
    std::int32_t n = 0;
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> col;
    std::vector<double> val;

    std::vector<double> matvec(const std::vector<double>& x) const {
        std::vector<double> y(n, 0.0);
        for (std::int32_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
            y[i] = s;
        }
        return y;
    }

    double quad_form(const std::vector<double>& x) const {
        double s = 0.0;
        for (std::int32_t i = 0; i < n; ++i) {
            double r = 0.0;
            for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) r += val[p] * x[col[p]];
            s += x[i] * r;
        }
        return s;
    }

    double entry(std::int32_t i, std::int32_t j) const {
        for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col[p] == j) return val[p];
        return 0.0;
    }
};

// Gram matrix of the least-squares scalar product; symmetric positive
// definite by the fundamental equivalence
struct SparseSpdSystem {
    std::int32_t n = 0;
    Csr mat;
};

namespace detail {

struct CooEntry {
    std::int32_t row, col;
    double val;
};

// duplicate summation in a fixed order so re-assembly is bit-identical
inline Csr compress_coo(std::int32_t n, std::vector<CooEntry>& coo) {
    std::stable_sort(coo.begin(), coo.end(), [](const CooEntry& a, const CooEntry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    Csr m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    std::size_t unique = 0;
    for (std::size_t i = 0; i < coo.size();) {
        std::size_t j = i + 1;
        while (j < coo.size() && coo[j].row == coo[i].row && coo[j].col == coo[i].col) ++j;
        ++unique;
        i = j;
    }
    m.col.reserve(unique);
    m.val.reserve(unique);
    for (std::size_t i = 0; i < coo.size();) {
        double s = coo[i].val;
        std::size_t j = i + 1;
        while (j < coo.size() && coo[j].row == coo[i].row && coo[j].col == coo[i].col) s += coo[j++].val;
        m.col.push_back(coo[i].col);
        m.val.push_back(s);
        ++m.row_ptr[coo[i].row + 1];
        i = j;
    }
    for (std::int32_t r = 0; r < n; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

// element degrees of freedom: 3 RT edges then up to 3 interior vertices
struct ElementDofs {
    std::int32_t idx[6];
    int n = 0;
};

inline ElementDofs element_dofs(const Mesh& m, const DofMap& dof, std::size_t t) {
    ElementDofs ed;
    for (int e = 0; e < 3; ++e) ed.idx[ed.n++] = dof.tri_edge[t][e];
    for (int i = 0; i < 3; ++i) {
        const std::int32_t d = dof.vertex_dof[m.tris[t].v[i]];
        if (d >= 0) ed.idx[ed.n++] = dof.n_rt + d;
    }
    return ed;
}

} // namespace detail

/******************************************************************************
Gram matrix of A(p,u; q,v) = w1^2 C_F^2 (div p, div q) + (a p - b grad u,
a q - b grad v). All integrands are polynomials of degree <= 2 per triangle,
so the midpoint rule integrates them exactly.
******************************************************************************/
inline SparseSpdSystem assemble_system(const Mesh& m, const DofMap& dof, const WeightedScheme& ws,
                                       double c_f) {
    const std::size_t nt = m.tris.size();
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(2);

    struct ElementMatrix {
        detail::ElementDofs dofs;
        double k[6][6];
    };
    std::vector<ElementMatrix> elems(nt);

    parallel_for(nt, [&](std::size_t t) {
        ElementMatrix& em = elems[t];
        em.dofs = detail::element_dofs(m, dof, t);
        const TriGeom g = tri_geom(m, t);

        double div_phi[3];
        for (int e = 0; e < 3; ++e) div_phi[e] = rt0_basis_div(g, e, dof.tri_sign[t][e]);

        Vec2 grads[3];
        int nvtx = 0;
        int vtx_local[3];
        for (int i = 0; i < 3; ++i)
            if (dof.vertex_dof[m.tris[t].v[i]] >= 0) {
                grads[nvtx] = g.grad_lambda[i];
                vtx_local[nvtx++] = i;
            }
        (void)vtx_local;

        // mass block (phi_e, phi_f) by the midpoint rule
        double mass[3][3] = {};
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            Vec2 phi[3];
            for (int e = 0; e < 3; ++e) phi[e] = rt0_basis(g, e, dof.tri_sign[t][e], x);
            for (int e = 0; e < 3; ++e)
                for (int f = 0; f < 3; ++f) mass[e][f] += w * dot(phi[e], phi[f]);
        }

        for (int e = 0; e < 3; ++e)
            for (int f = 0; f < 3; ++f)
                em.k[e][f] = w1sq_cf2 * div_phi[e] * div_phi[f] * g.area + ws.a * ws.a * mass[e][f];

        Vec2 phi_int[3];
        for (int e = 0; e < 3; ++e) phi_int[e] = rt0_basis_integral(g, e, dof.tri_sign[t][e]);
        for (int e = 0; e < 3; ++e)
            for (int i = 0; i < nvtx; ++i) {
                const double v = -ws.a * ws.b * dot(phi_int[e], grads[i]);
                em.k[e][3 + i] = v;
                em.k[3 + i][e] = v;
            }
        for (int i = 0; i < nvtx; ++i)
            for (int j = 0; j < nvtx; ++j)
                em.k[3 + i][3 + j] = ws.b * ws.b * dot(grads[i], grads[j]) * g.area;
    });

    std::vector<detail::CooEntry> coo;
    coo.reserve(nt * 36);
    for (const auto& em : elems)
        for (int i = 0; i < em.dofs.n; ++i)
            for (int j = 0; j < em.dofs.n; ++j)
                coo.push_back({em.dofs.idx[i], em.dofs.idx[j], em.k[i][j]});

    SparseSpdSystem sys;
    sys.n = dof.n_total();
    sys.mat = detail::compress_coo(sys.n, coo);
    return sys;
}

namespace detail {

// per-element data of the previous iterate entering the linearization
struct PrevState {
    double div_prev;     // constant
    Vec2 sigma_prev;     // sigma(grad u_prev), constant for m = 0
    Vec2 grad_prev;
};

inline PrevState prev_state(const Mesh& m, const DofMap& dof, const Nonlinearity& nl,
                            const DiscreteSolution& prev, std::size_t t) {
    PrevState ps;
    ps.div_prev = div_rt0(m, dof, t, prev.rt);
    ps.grad_prev = grad_s1(m, dof, t, prev.s1);
    ps.sigma_prev = nl.sigma(ps.grad_prev);
    return ps;
}

inline Vec2 eval_rt_local(const TriGeom& g, const DofMap& dof, std::size_t t,
                          const std::vector<double>& rt, Vec2 x) {
    Vec2 v{0, 0};
    for (int e = 0; e < 3; ++e) v += rt[dof.tri_edge[t][e]] * rt0_basis(g, e, dof.tri_sign[t][e], x);
    return v;
}

} // namespace detail

/******************************************************************************
Load vector of one damped linearization step: the next iterate solves
A(x, .) = A(prev, .) + delta [F(.) - B(prev, .)], which reduces elementwise to

  divergence slot:   w1^2 C_F^2 ( div p' - delta (f1 + div p'), div q )
  constitutive slot: ( a p' - b grad u' - delta [f2 + p' - sigma(grad u')],
                       a q - b grad v )
******************************************************************************/
inline std::vector<double> assemble_zarantonello_rhs(const Mesh& m, const DofMap& dof,
                                                     const WeightedScheme& ws, double c_f, double delta,
                                                     const DiscreteSolution& prev,
                                                     const ProblemSpec& problem) {
    detail::check_solution(m, dof, prev);
    const std::size_t nt = m.tris.size();
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(4);

    struct ElementLoad {
        detail::ElementDofs dofs;
        double r[6];
    };
    std::vector<ElementLoad> elems(nt);

    parallel_for(nt, [&](std::size_t t) {
        ElementLoad& el = elems[t];
        el.dofs = detail::element_dofs(m, dof, t);
        for (double& v : el.r) v = 0.0;
        const TriGeom g = tri_geom(m, t);
        const detail::PrevState ps = detail::prev_state(m, dof, problem.nl, prev, t);

        // divergence slot
        const double int_f1 = problem.f1.moments(g).first;
        const double div_data = (1.0 - delta) * ps.div_prev * g.area - delta * int_f1;
        for (int e = 0; e < 3; ++e)
            el.r[e] += w1sq_cf2 * rt0_basis_div(g, e, dof.tri_sign[t][e]) * div_data;

        // constitutive slot: G(x) = (a - delta) p'(x) - b grad u'
        //                           + delta sigma(grad u') - delta f2(x)
        const Vec2 g_const = -ws.b * ps.grad_prev + delta * ps.sigma_prev;
        Vec2 int_g{0, 0};
        double int_g_phi[3] = {};
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            Vec2 gval = g_const + (ws.a - delta) * detail::eval_rt_local(g, dof, t, prev.rt, x);
            if (!problem.f2.is_zero()) gval -= delta * problem.f2.eval(x);
            int_g += w * gval;
            for (int e = 0; e < 3; ++e)
                int_g_phi[e] += w * dot(gval, rt0_basis(g, e, dof.tri_sign[t][e], x));
        }
        for (int e = 0; e < 3; ++e) el.r[e] += ws.a * int_g_phi[e];
        int slot = 3;
        for (int i = 0; i < 3; ++i) {
            if (dof.vertex_dof[m.tris[t].v[i]] < 0) continue;
            el.r[slot++] += -ws.b * dot(g.grad_lambda[i], int_g);
        }
    });

    std::vector<double> rhs(dof.n_total(), 0.0);
    for (const auto& el : elems)
        for (int i = 0; i < el.dofs.n; ++i) rhs[el.dofs.idx[i]] += el.r[i];
    return rhs;
}

// load vector of the linear least-squares problem:
// A(x, .) = -C_F^2 (g1, w1 div q) - (g2, a q - b grad v)
inline std::vector<double> assemble_linear_ls_rhs(const Mesh& m, const DofMap& dof,
                                                  const WeightedScheme& ws, double c_f,
                                                  const ScalarField& g1, const VectorField& g2) {
    const std::size_t nt = m.tris.size();
    const double cf2 = c_f * c_f;
    const QuadRule& quad = quadrature_rule(4);

    struct ElementLoad {
        detail::ElementDofs dofs;
        double r[6];
    };
    std::vector<ElementLoad> elems(nt);

    parallel_for(nt, [&](std::size_t t) {
        ElementLoad& el = elems[t];
        el.dofs = detail::element_dofs(m, dof, t);
        for (double& v : el.r) v = 0.0;
        const TriGeom g = tri_geom(m, t);

        const double int_g1 = g1.moments(g).first;
        for (int e = 0; e < 3; ++e)
            el.r[e] -= cf2 * ws.w1 * rt0_basis_div(g, e, dof.tri_sign[t][e]) * int_g1;

        if (!g2.is_zero()) {
            Vec2 int_g2{0, 0};
            double int_g2_phi[3] = {};
            for (const auto& qp : quad.points) {
                const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
                const double w = qp.w * 2.0 * g.area;
                const Vec2 val = g2.eval(x);
                int_g2 += w * val;
                for (int e = 0; e < 3; ++e)
                    int_g2_phi[e] += w * dot(val, rt0_basis(g, e, dof.tri_sign[t][e], x));
            }
            for (int e = 0; e < 3; ++e) el.r[e] -= ws.a * int_g2_phi[e];
            int slot = 3;
            for (int i = 0; i < 3; ++i) {
                if (dof.vertex_dof[m.tris[t].v[i]] < 0) continue;
                el.r[slot++] += ws.b * dot(g.grad_lambda[i], int_g2);
            }
        }
    });

    std::vector<double> rhs(dof.n_total(), 0.0);
    for (const auto& el : elems)
        for (int i = 0; i < el.dofs.n; ++i) rhs[el.dofs.idx[i]] += el.r[i];
    return rhs;
}

// load vector of the nonlinear operator: B(p,u; q,v) = w1^2 C_F^2 (div p,
// div q) + (p - sigma(grad u), a q - b grad v); exact elementwise quadrature
inline std::vector<double> assemble_b_load(const Mesh& m, const DofMap& dof, const WeightedScheme& ws,
                                           double c_f, const Nonlinearity& nl,
                                           const DiscreteSolution& sol) {
    detail::check_solution(m, dof, sol);
    const std::size_t nt = m.tris.size();
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(2);

    struct ElementLoad {
        detail::ElementDofs dofs;
        double r[6];
    };
    std::vector<ElementLoad> elems(nt);

    parallel_for(nt, [&](std::size_t t) {
        ElementLoad& el = elems[t];
        el.dofs = detail::element_dofs(m, dof, t);
        for (double& v : el.r) v = 0.0;
        const TriGeom g = tri_geom(m, t);
        const detail::PrevState ps = detail::prev_state(m, dof, nl, sol, t);

        for (int e = 0; e < 3; ++e)
            el.r[e] += w1sq_cf2 * ps.div_prev * rt0_basis_div(g, e, dof.tri_sign[t][e]) * g.area;

        Vec2 int_res{0, 0};
        double int_res_phi[3] = {};
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const double w = qp.w * 2.0 * g.area;
            const Vec2 res = detail::eval_rt_local(g, dof, t, sol.rt, x) - ps.sigma_prev;
            int_res += w * res;
            for (int e = 0; e < 3; ++e)
                int_res_phi[e] += w * dot(res, rt0_basis(g, e, dof.tri_sign[t][e], x));
        }
        for (int e = 0; e < 3; ++e) el.r[e] += ws.a * int_res_phi[e];
        int slot = 3;
        for (int i = 0; i < 3; ++i) {
            if (dof.vertex_dof[m.tris[t].v[i]] < 0) continue;
            el.r[slot++] += -ws.b * dot(g.grad_lambda[i], int_res);
        }
    });

    std::vector<double> rhs(dof.n_total(), 0.0);
    for (const auto& el : elems)
        for (int i = 0; i < el.dofs.n; ++i) rhs[el.dofs.idx[i]] += el.r[i];
    return rhs;
}

// squared least-squares norm |||(p,u)|||_A^2, elementwise (equals x^T A x)
inline double a_norm_sq(const Mesh& m, const DofMap& dof, const WeightedScheme& ws, double c_f,
                        const DiscreteSolution& sol) {
    detail::check_solution(m, dof, sol);
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(2);
    std::vector<double> per_elem(m.tris.size());
    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const double d = div_rt0(m, dof, t, sol.rt);
        const Vec2 grad = grad_s1(m, dof, t, sol.s1);
        double acc = w1sq_cf2 * d * d * g.area;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            const Vec2 r = ws.a * detail::eval_rt_local(g, dof, t, sol.rt, x) - ws.b * grad;
            acc += qp.w * 2.0 * g.area * norm_sq(r);
        }
        per_elem[t] = acc;
    });
    return std::accumulate(per_elem.begin(), per_elem.end(), 0.0);
}

// squared weighted product norm |||(p,u)|||^2 = w1^2 C_F^2 ||div p||^2
// + ||a p||^2 + ||b grad u||^2
inline double omega_norm_sq(const Mesh& m, const DofMap& dof, const WeightedScheme& ws, double c_f,
                            const DiscreteSolution& sol) {
    detail::check_solution(m, dof, sol);
    const double w1sq_cf2 = ws.w1_sq() * c_f * c_f;
    const QuadRule& quad = quadrature_rule(2);
    std::vector<double> per_elem(m.tris.size());
    parallel_for(m.tris.size(), [&](std::size_t t) {
        const TriGeom g = tri_geom(m, t);
        const double d = div_rt0(m, dof, t, sol.rt);
        const Vec2 grad = grad_s1(m, dof, t, sol.s1);
        double acc = w1sq_cf2 * d * d * g.area + ws.b * ws.b * norm_sq(grad) * g.area;
        for (const auto& qp : quad.points) {
            const Vec2 x = map_to_triangle(g.p[0], g.p[1], g.p[2], qp.xi, qp.eta);
            acc += qp.w * 2.0 * g.area * ws.a * ws.a *
                   norm_sq(detail::eval_rt_local(g, dof, t, sol.rt, x));
        }
        per_elem[t] = acc;
    });
    return std::accumulate(per_elem.begin(), per_elem.end(), 0.0);
}

// max over triangles of |grad u_h| (piecewise constant for m = 0)
inline double grad_inf_norm(const Mesh& m, const DofMap& dof, const DiscreteSolution& sol) {
    double best = 0.0;
    for (std::size_t t = 0; t < m.tris.size(); ++t)
        best = std::max(best, norm(grad_s1(m, dof, t, sol.s1)));
    return best;
}

} // namespace zlsfem
