#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "zlsfem/geometry.hpp"

namespace zlsfem {

/******************************************************************************
Conforming 2D triangulation with newest-vertex bisection.

Triangles are stored in normalized form: the vertex opposite the refinement
edge comes first, so the refinement edge is always (v[1], v[2]). Vertex order
is counterclockwise. Refinement never mutates a mesh; it produces a new one
that keeps a pointer to its parent plus the per-triangle ancestry and the
edge each new vertex bisected. That record is what makes exact prolongation
of discrete solutions possible without any point location.
******************************************************************************/
struct Mesh {
    struct Tri {
        std::array<std::int32_t, 3> v;
        std::int32_t generation = 0;
    };

    std::vector<Vec2> vertices;
    std::vector<Tri> tris;

    std::uint64_t id = 0;
    std::shared_ptr<const Mesh> parent;               // null for root meshes
    std::vector<std::int32_t> parent_tri;             // per triangle, index in *parent
    std::int32_t first_new_vertex = 0;                // vertices below this index exist in parent
    std::vector<std::array<std::int32_t, 2>> new_vertex_edge; // bisected edge per new vertex

    std::size_t n_vertices() const { return vertices.size(); }
    std::size_t n_triangles() const { return tris.size(); }
};

using MeshPtr = std::shared_ptr<const Mesh>;

struct MarkedSet {
    std::vector<std::int32_t> indices;
};

namespace detail {

inline std::uint64_t edge_key(std::int32_t a, std::int32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
}

inline std::uint64_t fresh_mesh_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

} // namespace detail

inline double tri_area(const Mesh& m, std::size_t t) {
    const auto& v = m.tris[t].v;
    return signed_area(m.vertices[v[0]], m.vertices[v[1]], m.vertices[v[2]]);
}

inline double total_area(const Mesh& m) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.tris.size(); ++t) s += tri_area(m, t);
    return s;
}

// General constructor from vertex list and (i, j, k, refinement-edge) tuples.
// The local refinement-edge index r in {0,1,2} names the edge opposite local
// vertex r; triangles are rotated so that r becomes 0.
inline MeshPtr make_mesh(std::vector<Vec2> vertices,
                         const std::vector<std::array<std::int32_t, 4>>& tris) {
    auto mesh = std::make_shared<Mesh>();
    mesh->vertices = std::move(vertices);
    mesh->tris.reserve(tris.size());
    const auto nv = static_cast<std::int32_t>(mesh->vertices.size());
    for (const auto& t : tris) {
        const std::int32_t r = t[3];
        if (r < 0 || r > 2) throw std::invalid_argument("make_mesh: refinement edge index out of range");
        std::array<std::int32_t, 3> v{t[0], t[1], t[2]};
        std::rotate(v.begin(), v.begin() + r, v.end());
        for (std::int32_t i : v)
            if (i < 0 || i >= nv) throw std::invalid_argument("make_mesh: vertex index out of range");
        if (signed_area(mesh->vertices[v[0]], mesh->vertices[v[1]], mesh->vertices[v[2]]) <= 0.0)
            throw std::invalid_argument("make_mesh: triangle is not positively oriented");
        mesh->tris.push_back({v, 0});
    }
    mesh->first_new_vertex = nv;
    mesh->id = detail::fresh_mesh_id();
    return mesh;
}

// (0,1)^2 split by the diagonal from (0,0) to (1,1); both refinement edges
// are the diagonal.
inline MeshPtr make_unit_square_initial() {
    std::vector<Vec2> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    std::vector<std::array<std::int32_t, 4>> t = {
        {1, 2, 0, 0}, // peak (1,0), refinement edge (1,1)-(0,0)
        {3, 0, 2, 0}, // peak (0,1), refinement edge (0,0)-(1,1)
    };
    return make_mesh(std::move(v), t);
}

// L-shape (-1,1)^2 \ [0,1)^2. Each of the three unit squares is split by the
// diagonal through the re-entrant corner (0,0); refinement edges are those
// diagonals, which are also the longest edges.
inline MeshPtr make_l_shape_initial() {
    // lexicographic by (x, y)
    std::vector<Vec2> v = {
        {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 0}, {0, 1}, {1, -1}, {1, 0},
    };
    std::vector<std::array<std::int32_t, 4>> t = {
        // bottom-left square, diagonal (-1,-1)-(0,0)
        {1, 0, 4, 0},
        {3, 4, 0, 0},
        // top-left square, diagonal (-1,1)-(0,0)
        {1, 4, 2, 0},
        {5, 2, 4, 0},
        // bottom-right square, diagonal (0,0)-(1,-1)
        {7, 4, 6, 0},
        {3, 6, 4, 0},
    };
    return make_mesh(std::move(v), t);
}

// Coarsest conforming refinement in which every marked triangle is bisected
// at its refinement edge. Closure propagates recursively to the neighbor
// across the refinement edge; children follow the newest-vertex rule.
inline MeshPtr refine_nvb(const MeshPtr& mesh_in, const MarkedSet& marked) {
    const Mesh& m = *mesh_in;
    if (m.tris.empty()) throw std::invalid_argument("refine_nvb: empty mesh");
    {
        std::vector<char> seen(m.tris.size(), 0);
        for (std::int32_t i : marked.indices) {
            if (i < 0 || static_cast<std::size_t>(i) >= m.tris.size())
                throw std::invalid_argument("refine_nvb: marked index out of range");
            if (seen[i]) throw std::invalid_argument("refine_nvb: duplicate marked index");
            seen[i] = 1;
        }
    }
    if (marked.indices.empty()) return mesh_in;

    struct WorkTri {
        std::array<std::int32_t, 3> v;
        std::int32_t gen;
        std::int32_t root; // ancestor triangle in the input mesh
        bool alive;
    };

    std::vector<Vec2> verts = m.vertices;
    std::vector<WorkTri> tris;
    tris.reserve(m.tris.size() * 2);
    for (std::size_t t = 0; t < m.tris.size(); ++t)
        tris.push_back({m.tris[t].v, m.tris[t].generation, static_cast<std::int32_t>(t), true});

    std::vector<std::array<std::int32_t, 2>> new_vertex_edge;
    std::unordered_map<std::uint64_t, std::int32_t> midpoint;

    // up to two alive triangles per edge, -1 marks an empty slot
    std::unordered_map<std::uint64_t, std::array<std::int32_t, 2>> incidence;
    incidence.reserve(m.tris.size() * 2);
    auto slot_of = [&](std::uint64_t key) -> std::array<std::int32_t, 2>& {
        auto it = incidence.find(key);
        if (it == incidence.end()) it = incidence.emplace(key, std::array<std::int32_t, 2>{-1, -1}).first;
        return it->second;
    };
    auto add_tri_edges = [&](std::int32_t t) {
        const auto& v = tris[t].v;
        for (int e = 0; e < 3; ++e) {
            auto& s = slot_of(detail::edge_key(v[(e + 1) % 3], v[(e + 2) % 3]));
            if (s[0] < 0) s[0] = t;
            else if (s[1] < 0) s[1] = t;
            else throw std::logic_error("refine_nvb: edge shared by more than two triangles");
        }
    };
    auto remove_tri_edges = [&](std::int32_t t) {
        const auto& v = tris[t].v;
        for (int e = 0; e < 3; ++e) {
            auto& s = slot_of(detail::edge_key(v[(e + 1) % 3], v[(e + 2) % 3]));
            if (s[0] == t) s[0] = s[1], s[1] = -1;
            else if (s[1] == t) s[1] = -1;
        }
    };
    for (std::int32_t t = 0; t < static_cast<std::int32_t>(tris.size()); ++t) add_tri_edges(t);

    auto ref_edge_key = [&](std::int32_t t) {
        return detail::edge_key(tris[t].v[1], tris[t].v[2]);
    };
    auto neighbor_across = [&](std::int32_t t, std::uint64_t key) -> std::int32_t {
        const auto& s = slot_of(key);
        if (s[0] == t) return s[1];
        if (s[1] == t) return s[0];
        return -1;
    };
    auto get_midpoint = [&](std::int32_t a, std::int32_t b) -> std::int32_t {
        const std::uint64_t key = detail::edge_key(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const std::int32_t idx = static_cast<std::int32_t>(verts.size());
        verts.push_back((verts[a] + verts[b]) * 0.5);
        new_vertex_edge.push_back({std::min(a, b), std::max(a, b)});
        midpoint.emplace(key, idx);
        return idx;
    };

    // Bisect triangle t at its refinement edge (v1, v2): children keep the
    // parent orientation and get the old non-refinement edges as their
    // refinement edges (edges opposite the new vertex).
    auto split_single = [&](std::int32_t t) {
        const auto v = tris[t].v;
        const std::int32_t mid = get_midpoint(v[1], v[2]);
        remove_tri_edges(t);
        tris[t].alive = false;
        const std::int32_t gen = tris[t].gen + 1;
        const std::int32_t root = tris[t].root;
        const std::int32_t c1 = static_cast<std::int32_t>(tris.size());
        tris.push_back({{mid, v[0], v[1]}, gen, root, true});
        tris.push_back({{mid, v[2], v[0]}, gen, root, true});
        add_tri_edges(c1);
        add_tri_edges(c1 + 1);
    };

    std::vector<char> in_progress(tris.size(), 0);
    std::vector<std::uint64_t> pending; // hanging edges produced by cyclic chains

    // Compatible bisection with recursive closure. The retry loop runs at
    // most twice: after the neighbor is refined, its child sharing E carries
    // E as refinement edge.
    auto bisect = [&](auto&& self, std::int32_t t, int depth) -> void {
        if (depth > static_cast<int>(tris.size()) + 8)
            throw std::logic_error("refine_nvb: closure recursion exceeded bound");
        if (static_cast<std::size_t>(t) >= in_progress.size()) in_progress.resize(tris.size(), 0);
        in_progress[t] = 1;
        for (int round = 0; round < 4; ++round) {
            const std::uint64_t key = ref_edge_key(t);
            const std::int32_t n = neighbor_across(t, key);
            if (n < 0) { // boundary refinement edge
                split_single(t);
                in_progress.resize(tris.size(), 0);
                return;
            }
            if (ref_edge_key(n) == key) { // compatible pair
                split_single(t);
                split_single(n);
                in_progress.resize(tris.size(), 0);
                return;
            }
            if (in_progress[n]) {
                // cyclic compatibility chain (possible only for imported
                // labelings): bisect alone and fix the hanging edge later
                split_single(t);
                in_progress.resize(tris.size(), 0);
                pending.push_back(key);
                return;
            }
            self(self, n, depth + 1);
            in_progress.resize(tris.size(), 0);
        }
        throw std::logic_error("refine_nvb: compatibility retry exceeded");
    };

    for (std::int32_t idx : marked.indices)
        if (tris[idx].alive) bisect(bisect, idx, 0);

    // Resolve hanging edges left by cyclic chains. Bisecting a triangle that
    // carries the hanging edge as a non-refinement edge hands that edge to
    // one of its children as refinement edge, so each pass makes progress.
    std::size_t guard = 0;
    while (!pending.empty()) {
        if (++guard > 64 * m.tris.size() + 64)
            throw std::logic_error("refine_nvb: hanging-edge resolution did not terminate");
        const std::uint64_t key = pending.back();
        const auto s = slot_of(key);
        const std::int32_t t = s[0] >= 0 ? s[0] : s[1];
        if (t < 0) { pending.pop_back(); continue; }
        if (ref_edge_key(t) == key) split_single(t);
        else bisect(bisect, t, 0);
    }

    auto out = std::make_shared<Mesh>();
    out->vertices = std::move(verts);
    for (const auto& wt : tris)
        if (wt.alive) {
            out->tris.push_back({wt.v, wt.gen});
            out->parent_tri.push_back(wt.root);
        }
    out->parent = mesh_in;
    out->first_new_vertex = static_cast<std::int32_t>(m.vertices.size());
    out->new_vertex_edge = std::move(new_vertex_edge);
    out->id = detail::fresh_mesh_id();
    return out;
}

inline MeshPtr refine_uniform(MeshPtr mesh, int passes) {
    for (int i = 0; i < passes; ++i) {
        MarkedSet all;
        all.indices.resize(mesh->tris.size());
        for (std::size_t t = 0; t < mesh->tris.size(); ++t) all.indices[t] = static_cast<std::int32_t>(t);
        mesh = refine_nvb(mesh, all);
    }
    return mesh;
}

struct ConformityReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Diagnostic oracle: reports violated mesh invariants. Hanging nodes are
// detected through midpoint lookup (all NVB vertices are edge midpoints);
// small meshes additionally get an exhaustive vertex-on-edge scan.
inline ConformityReport check_conformity(const Mesh& m) {
    ConformityReport rep;
    auto complain = [&rep](const std::string& s) { rep.violations.push_back(s); };

    const auto nv = static_cast<std::int32_t>(m.vertices.size());
    for (std::size_t t = 0; t < m.tris.size(); ++t) {
        const auto& v = m.tris[t].v;
        bool bad_index = false;
        for (std::int32_t i : v)
            if (i < 0 || i >= nv) bad_index = true;
        if (bad_index) {
            complain("triangle " + std::to_string(t) + ": vertex index out of range");
            continue;
        }
        if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2])
            complain("triangle " + std::to_string(t) + ": repeated vertex");
        else if (tri_area(m, t) <= 0.0)
            complain("triangle " + std::to_string(t) + ": negative area");
    }
    if (!rep.ok()) return rep;

    std::unordered_map<std::uint64_t, int> edge_count;
    edge_count.reserve(m.tris.size() * 2);
    for (const auto& tri : m.tris)
        for (int e = 0; e < 3; ++e)
            ++edge_count[detail::edge_key(tri.v[(e + 1) % 3], tri.v[(e + 2) % 3])];
    for (const auto& [key, cnt] : edge_count)
        if (cnt > 2)
            complain("edge (" + std::to_string(static_cast<std::int32_t>(key >> 32)) + "," +
                     std::to_string(static_cast<std::int32_t>(key & 0xffffffff)) +
                     "): shared by more than two triangles");

    {
        std::unordered_map<std::uint64_t, int> tri_sets; // duplicate triangles
        for (std::size_t t = 0; t < m.tris.size(); ++t) {
            auto v = m.tris[t].v;
            std::sort(v.begin(), v.end());
            const std::uint64_t h = (static_cast<std::uint64_t>(v[0]) * 0x9e3779b1ull) ^
                                    (static_cast<std::uint64_t>(v[1]) << 21) ^
                                    (static_cast<std::uint64_t>(v[2]) << 42);
            if (++tri_sets[h] > 1) complain("triangle " + std::to_string(t) + ": duplicate vertex set");
        }
    }

    // midpoint-based hanging node test; hash buckets may collide, so matches
    // are confirmed against the actual coordinates
    auto coord_key = [](Vec2 p) {
        std::uint64_t bx, by;
        static_assert(sizeof(double) == 8);
        std::memcpy(&bx, &p.x, 8);
        std::memcpy(&by, &p.y, 8);
        bx *= 0x9e3779b97f4a7c15ull;
        bx ^= bx >> 29;
        return bx * 0xbf58476d1ce4e5b9ull + by;
    };
    std::unordered_multimap<std::uint64_t, std::int32_t> vertex_at;
    vertex_at.reserve(m.vertices.size());
    for (std::int32_t i = 0; i < nv; ++i) vertex_at.emplace(coord_key(m.vertices[i]), i);
    for (const auto& [key, cnt] : edge_count) {
        const auto a = static_cast<std::int32_t>(key >> 32);
        const auto b = static_cast<std::int32_t>(key & 0xffffffff);
        const Vec2 mid = (m.vertices[a] + m.vertices[b]) * 0.5;
        auto [lo, hi] = vertex_at.equal_range(coord_key(mid));
        for (auto it = lo; it != hi; ++it) {
            const std::int32_t v = it->second;
            if (v != a && v != b && m.vertices[v].x == mid.x && m.vertices[v].y == mid.y)
                complain("edge (" + std::to_string(a) + "," + std::to_string(b) +
                         "): nonconforming edge (hanging node " + std::to_string(v) + ")");
        }
    }

    // exhaustive scan for small meshes: vertex strictly inside an edge
    if (m.vertices.size() <= 300 && edge_count.size() <= 900) {
        for (const auto& [key, cnt] : edge_count) {
            const auto a = static_cast<std::int32_t>(key >> 32);
            const auto b = static_cast<std::int32_t>(key & 0xffffffff);
            const Vec2 pa = m.vertices[a], pb = m.vertices[b];
            const double len = norm(pb - pa);
            for (std::int32_t i = 0; i < nv; ++i) {
                if (i == a || i == b) continue;
                const Vec2 p = m.vertices[i];
                const double c = cross(pb - pa, p - pa);
                const double s = dot(pb - pa, p - pa) / (len * len);
                if (std::abs(c) < 1e-12 * len && s > 1e-12 && s < 1.0 - 1e-12)
                    complain("edge (" + std::to_string(a) + "," + std::to_string(b) +
                             "): nonconforming edge (vertex " + std::to_string(i) + " on interior)");
            }
        }
    }
    return rep;
}

// minimum interior angle over all triangles, degrees
inline double min_angle(const Mesh& m) {
    double best = 180.0;
    for (const auto& tri : m.tris) {
        for (int i = 0; i < 3; ++i) {
            const Vec2 p = m.vertices[tri.v[i]];
            const Vec2 u = m.vertices[tri.v[(i + 1) % 3]] - p;
            const Vec2 w = m.vertices[tri.v[(i + 2) % 3]] - p;
            const double c = dot(u, w) / (norm(u) * norm(w));
            const double ang = std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / 3.14159265358979323846;
            best = std::min(best, ang);
        }
    }
    return best;
}

// Plain-text export: "V T", V lines "x y", T lines "i j k r". Storage is
// normalized, so r is always 0 on export; import accepts any r in 0..2.
inline void write_mesh(std::ostream& os, const Mesh& m) {
    os << m.vertices.size() << ' ' << m.tris.size() << '\n';
    char buf[80];
    for (const Vec2& v : m.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
        os << buf;
    }
    for (const auto& t : m.tris)
        os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << " 0\n";
}

inline std::string mesh_to_string(const Mesh& m) {
    std::ostringstream os;
    write_mesh(os, m);
    return os.str();
}

inline MeshPtr read_mesh(std::istream& is) {
    std::size_t nv = 0, nt = 0;
    if (!(is >> nv >> nt)) throw std::invalid_argument("read_mesh: bad header");
    std::vector<Vec2> verts(nv);
    for (auto& v : verts)
        if (!(is >> v.x >> v.y)) throw std::invalid_argument("read_mesh: bad vertex line");
    std::vector<std::array<std::int32_t, 4>> tris(nt);
    for (auto& t : tris)
        if (!(is >> t[0] >> t[1] >> t[2] >> t[3])) throw std::invalid_argument("read_mesh: bad triangle line");
    return make_mesh(std::move(verts), tris);
}

} // namespace zlsfem
