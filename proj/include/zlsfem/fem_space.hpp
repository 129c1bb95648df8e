#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "zlsfem/mesh.hpp"

namespace zlsfem {

/******************************************************************************
Degrees of freedom for RT0(T) x S1_0(T).

RT0 coefficients live on edges (lexicographic global order by sorted vertex
pair) and carry the constant normal-trace value of the flux across the edge.
The global normal of an edge points out of the lowest-indexed incident
triangle, making rt_sign a pure +-1 table; this yields continuous normal
traces, i.e. the assembled field lies in H(div).

S1 coefficients live on interior vertices only (homogeneous Dirichlet data is
imposed by excluding boundary vertices from the DOF set). The global solution
vector is [rt | s1].

The DOF layout has a per-entity extension point for higher polynomial degree,
but only m = 0 is implemented.
******************************************************************************/
struct DofMap {
    struct Edge {
        std::int32_t a, b;      // vertex indices, a < b
        std::int32_t t_lo, t_hi; // incident triangles, t_hi = -1 on the boundary
    };
    std::vector<Edge> edges;
    std::vector<std::array<std::int32_t, 3>> tri_edge; // local edge e (opposite vertex e) -> global edge
    std::vector<std::array<double, 3>> tri_sign;       // +-1 orientation factors
    std::vector<std::int32_t> vertex_dof;              // -1 for boundary vertices
    std::vector<char> vertex_on_boundary;
    std::int32_t n_rt = 0;
    std::int32_t n_s1 = 0;

    std::int32_t n_total() const { return n_rt + n_s1; }
};

inline DofMap build_dof_map(const Mesh& m) {
    DofMap dof;
    const auto nt = static_cast<std::int32_t>(m.tris.size());
    const auto nv = static_cast<std::int32_t>(m.vertices.size());

    std::unordered_map<std::uint64_t, std::array<std::int32_t, 2>> inc;
    inc.reserve(m.tris.size() * 2);
    for (std::int32_t t = 0; t < nt; ++t) {
        const auto& v = m.tris[t].v;
        for (int e = 0; e < 3; ++e) {
            const std::uint64_t key = detail::edge_key(v[(e + 1) % 3], v[(e + 2) % 3]);
            auto it = inc.find(key);
            if (it == inc.end()) inc.emplace(key, std::array<std::int32_t, 2>{t, -1});
            else it->second[1] = t;
        }
    }

    dof.edges.reserve(inc.size());
    for (const auto& [key, ts] : inc) {
        DofMap::Edge e;
        e.a = static_cast<std::int32_t>(key >> 32);
        e.b = static_cast<std::int32_t>(key & 0xffffffff);
        e.t_lo = std::min(ts[0], ts[1] < 0 ? ts[0] : ts[1]);
        e.t_hi = ts[1] < 0 ? -1 : std::max(ts[0], ts[1]);
        dof.edges.push_back(e);
    }
    std::sort(dof.edges.begin(), dof.edges.end(), [](const DofMap::Edge& x, const DofMap::Edge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    dof.n_rt = static_cast<std::int32_t>(dof.edges.size());

    std::unordered_map<std::uint64_t, std::int32_t> edge_index;
    edge_index.reserve(dof.edges.size());
    for (std::int32_t i = 0; i < dof.n_rt; ++i)
        edge_index.emplace(detail::edge_key(dof.edges[i].a, dof.edges[i].b), i);

    dof.tri_edge.resize(nt);
    dof.tri_sign.resize(nt);
    for (std::int32_t t = 0; t < nt; ++t) {
        const auto& v = m.tris[t].v;
        for (int e = 0; e < 3; ++e) {
            const std::int32_t ge = edge_index.at(detail::edge_key(v[(e + 1) % 3], v[(e + 2) % 3]));
            dof.tri_edge[t][e] = ge;
            dof.tri_sign[t][e] = (dof.edges[ge].t_lo == t) ? 1.0 : -1.0;
        }
    }

    dof.vertex_on_boundary.assign(nv, 0);
    for (const auto& e : dof.edges)
        if (e.t_hi < 0) {
            dof.vertex_on_boundary[e.a] = 1;
            dof.vertex_on_boundary[e.b] = 1;
        }
    dof.vertex_dof.assign(nv, -1);
    for (std::int32_t v = 0; v < nv; ++v)
        if (!dof.vertex_on_boundary[v]) dof.vertex_dof[v] = dof.n_s1++;
    return dof;
}

// local geometry bundle used by every element loop
struct TriGeom {
    Vec2 p[3];
    double area;
    double edge_len[3];   // length of the edge opposite vertex i
    Vec2 grad_lambda[3];  // gradients of the barycentric coordinates
    Vec2 centroid;
};

inline TriGeom tri_geom(const Mesh& m, std::size_t t) {
    TriGeom g;
    const auto& v = m.tris[t].v;
    for (int i = 0; i < 3; ++i) g.p[i] = m.vertices[v[i]];
    const double a2 = cross(g.p[1] - g.p[0], g.p[2] - g.p[0]); // 2 * area
    g.area = 0.5 * a2;
    for (int i = 0; i < 3; ++i) {
        const Vec2 e = g.p[(i + 1) % 3] - g.p[(i + 2) % 3];
        g.edge_len[i] = norm(e);
        g.grad_lambda[i] = perp(e) / a2; // points toward vertex i
    }
    g.centroid = (g.p[0] + g.p[1] + g.p[2]) / 3.0;
    return g;
}

// psi_e(x) = sign * |E_e| / (2|T|) * (x - P_e), the RT0 basis on a triangle
inline Vec2 rt0_basis(const TriGeom& g, int e, double sign, Vec2 x) {
    return (sign * g.edge_len[e] / (2.0 * g.area)) * (x - g.p[e]);
}

inline double rt0_basis_div(const TriGeom& g, int e, double sign) {
    return sign * g.edge_len[e] / g.area;
}

// integral of the basis over the triangle: sign * |E| * (centroid - P_e) / 2
inline Vec2 rt0_basis_integral(const TriGeom& g, int e, double sign) {
    return (sign * g.edge_len[e] * 0.5) * (g.centroid - g.p[e]);
}

struct DiscreteSolution {
    std::uint64_t mesh_id = 0;
    std::vector<double> rt; // length n_rt
    std::vector<double> s1; // length n_s1
};

inline DiscreteSolution zero_solution(const Mesh& m, const DofMap& dof) {
    DiscreteSolution s;
    s.mesh_id = m.id;
    s.rt.assign(dof.n_rt, 0.0);
    s.s1.assign(dof.n_s1, 0.0);
    return s;
}

inline std::vector<double> to_vector(const DiscreteSolution& s) {
    std::vector<double> x;
    x.reserve(s.rt.size() + s.s1.size());
    x.insert(x.end(), s.rt.begin(), s.rt.end());
    x.insert(x.end(), s.s1.begin(), s.s1.end());
    return x;
}

inline DiscreteSolution from_vector(const Mesh& m, const DofMap& dof, const std::vector<double>& x) {
    if (static_cast<std::int32_t>(x.size()) != dof.n_total())
        throw std::invalid_argument("from_vector: dimension mismatch");
    DiscreteSolution s;
    s.mesh_id = m.id;
    s.rt.assign(x.begin(), x.begin() + dof.n_rt);
    s.s1.assign(x.begin() + dof.n_rt, x.end());
    return s;
}

namespace detail {
inline void check_solution(const Mesh& m, const DofMap& dof, const DiscreteSolution& s) {
    if (s.mesh_id != m.id || static_cast<std::int32_t>(s.rt.size()) != dof.n_rt ||
        static_cast<std::int32_t>(s.s1.size()) != dof.n_s1)
        throw std::invalid_argument("discrete solution does not match the mesh");
}
} // namespace detail

// value of the RT0 field on triangle t; the point must lie inside
inline Vec2 eval_rt0(const Mesh& m, const DofMap& dof, std::size_t t, const std::vector<double>& rt_coeffs,
                     Vec2 x) {
    const TriGeom g = tri_geom(m, t);
    // barycentric containment check
    const double l1 = cross(g.p[1] - x, g.p[2] - x);
    const double l2 = cross(g.p[2] - x, g.p[0] - x);
    const double l3 = cross(g.p[0] - x, g.p[1] - x);
    const double tol = -1e-12 * 2.0 * g.area;
    if (l1 < tol || l2 < tol || l3 < tol) throw std::domain_error("eval_rt0: point outside triangle");
    Vec2 val{0, 0};
    for (int e = 0; e < 3; ++e)
        val += rt_coeffs[dof.tri_edge[t][e]] * rt0_basis(g, e, dof.tri_sign[t][e], x);
    return val;
}

// constant divergence of the RT0 field on triangle t
inline double div_rt0(const Mesh& m, const DofMap& dof, std::size_t t, const std::vector<double>& rt_coeffs) {
    const TriGeom g = tri_geom(m, t);
    double d = 0.0;
    for (int e = 0; e < 3; ++e)
        d += rt_coeffs[dof.tri_edge[t][e]] * rt0_basis_div(g, e, dof.tri_sign[t][e]);
    return d;
}

// constant gradient of the piecewise-linear function on triangle t
inline Vec2 grad_s1(const Mesh& m, const DofMap& dof, std::size_t t, const std::vector<double>& s1_coeffs) {
    const TriGeom g = tri_geom(m, t);
    Vec2 grad{0, 0};
    for (int i = 0; i < 3; ++i) {
        const std::int32_t d = dof.vertex_dof[m.tris[t].v[i]];
        if (d >= 0) grad += s1_coeffs[d] * g.grad_lambda[i];
    }
    return grad;
}

inline double s1_value_at_vertex(const DofMap& dof, const std::vector<double>& s1_coeffs, std::int32_t v) {
    const std::int32_t d = dof.vertex_dof[v];
    return d >= 0 ? s1_coeffs[d] : 0.0;
}

// brute-force point location (tests and diagnostics only)
inline std::size_t locate_triangle(const Mesh& m, Vec2 x) {
    for (std::size_t t = 0; t < m.tris.size(); ++t) {
        const auto& v = m.tris[t].v;
        const Vec2 p0 = m.vertices[v[0]], p1 = m.vertices[v[1]], p2 = m.vertices[v[2]];
        const double a2 = cross(p1 - p0, p2 - p0);
        const double tol = -1e-12 * a2;
        if (cross(p1 - x, p2 - x) >= tol && cross(p2 - x, p0 - x) >= tol && cross(p0 - x, p1 - x) >= tol)
            return t;
    }
    throw std::domain_error("locate_triangle: point outside mesh");
}

// outward unit normal of triangle t on the edge (a, b)
inline Vec2 outward_normal(const Mesh& m, std::size_t t, std::int32_t a, std::int32_t b) {
    const Vec2 pa = m.vertices[a], pb = m.vertices[b];
    Vec2 n = perp(pb - pa);
    n = n / norm(n);
    const auto& v = m.tris[t].v;
    const Vec2 centroid = (m.vertices[v[0]] + m.vertices[v[1]] + m.vertices[v[2]]) / 3.0;
    const Vec2 mid = (pa + pb) * 0.5;
    if (dot(n, mid - centroid) < 0.0) n = -n;
    return n;
}

namespace detail {

// one refinement step: coarse solution -> identical function on the child mesh
inline DiscreteSolution prolongate_step(const DiscreteSolution& sol, const Mesh& coarse,
                                        const DofMap& coarse_dof, const Mesh& fine, const DofMap& fine_dof) {
    DiscreteSolution out;
    out.mesh_id = fine.id;

    // S1: old vertices keep their value, new vertices average the bisected
    // edge endpoints (the coarse function is linear along that edge)
    out.s1.assign(fine_dof.n_s1, 0.0);
    std::vector<double> vertex_value(fine.vertices.size(), 0.0);
    for (std::size_t v = 0; v < coarse.vertices.size(); ++v)
        vertex_value[v] = s1_value_at_vertex(coarse_dof, sol.s1, static_cast<std::int32_t>(v));
    for (std::size_t v = coarse.vertices.size(); v < fine.vertices.size(); ++v) {
        const auto& pe = fine.new_vertex_edge[v - coarse.vertices.size()];
        vertex_value[v] = 0.5 * (vertex_value[pe[0]] + vertex_value[pe[1]]);
    }
    for (std::size_t v = 0; v < fine.vertices.size(); ++v)
        if (fine_dof.vertex_dof[v] >= 0) out.s1[fine_dof.vertex_dof[v]] = vertex_value[v];

    // RT0: a coarse RT0 field restricted to a child triangle is again of the
    // form a + c x, whose normal component is constant along any straight
    // segment, so the child coefficient is the coarse field evaluated at the
    // edge midpoint dotted with the child edge's global normal.
    out.rt.assign(fine_dof.n_rt, 0.0);
    for (std::int32_t e = 0; e < fine_dof.n_rt; ++e) {
        const auto& ed = fine_dof.edges[e];
        const std::size_t ft = static_cast<std::size_t>(ed.t_lo);
        const std::size_t ct = static_cast<std::size_t>(fine.parent_tri[ft]);
        const Vec2 mid = (fine.vertices[ed.a] + fine.vertices[ed.b]) * 0.5;
        const Vec2 n = outward_normal(fine, ft, ed.a, ed.b);
        // evaluate the coarse field on the ancestor triangle directly
        const TriGeom g = tri_geom(coarse, ct);
        Vec2 val{0, 0};
        for (int le = 0; le < 3; ++le)
            val += sol.rt[coarse_dof.tri_edge[ct][le]] * rt0_basis(g, le, coarse_dof.tri_sign[ct][le], mid);
        out.rt[e] = dot(val, n);
    }
    return out;
}

} // namespace detail

// Exact transfer to a refined mesh. `fine` must be reachable from `coarse`
// through refine_nvb steps; the represented function is unchanged.
inline DiscreteSolution prolongate(const DiscreteSolution& sol, const MeshPtr& coarse, const MeshPtr& fine,
                                   const DofMap& fine_dofmap) {
    if (sol.mesh_id != coarse->id)
        throw std::invalid_argument("prolongate: solution does not live on the coarse mesh");
    if (coarse->id == fine->id) {
        DiscreteSolution out = sol;
        return out;
    }
    std::vector<MeshPtr> chain; // fine ... coarse
    for (MeshPtr cur = fine; cur; cur = cur->parent) {
        chain.push_back(cur);
        if (cur->id == coarse->id) break;
    }
    if (chain.empty() || chain.back()->id != coarse->id)
        throw std::invalid_argument("prolongate: fine mesh is not a refinement of the coarse mesh");

    DiscreteSolution cur = sol;
    for (std::size_t i = chain.size() - 1; i > 0; --i) {
        const Mesh& c = *chain[i];
        const Mesh& f = *chain[i - 1];
        const DofMap cd = build_dof_map(c);
        const DofMap fd = (i - 1 == 0) ? fine_dofmap : build_dof_map(f);
        cur = detail::prolongate_step(cur, c, cd, f, fd);
    }
    return cur;
}

// debugging snapshot: "k ell n_rt n_s1" then one coefficient per line
inline void write_solution(std::ostream& os, int k, int ell, const DiscreteSolution& s) {
    os << k << ' ' << ell << ' ' << s.rt.size() << ' ' << s.s1.size() << '\n';
    char buf[48];
    for (double c : s.rt) {
        std::snprintf(buf, sizeof buf, "%.17g\n", c);
        os << buf;
    }
    for (double c : s.s1) {
        std::snprintf(buf, sizeof buf, "%.17g\n", c);
        os << buf;
    }
}

} // namespace zlsfem
