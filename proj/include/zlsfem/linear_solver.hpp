#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "zlsfem/assembly.hpp"
#include "zlsfem/geometry.hpp"

namespace zlsfem {

struct NotSpdError : std::runtime_error {
    explicit NotSpdError(const std::string& what) : std::runtime_error(what) {}
};

namespace solver_detail {

// Geometric nested dissection: split by the coordinate median, peel off the
// vertices of the first half that touch the second half as a separator, and
// eliminate the separator last. DOF coordinates (edge midpoints / vertices)
// are enough to get the usual O(n log n)-ish fill on 2D meshes.
inline std::vector<std::int32_t> nd_order(const Csr& pattern, const std::vector<Vec2>& pts) {
    const std::int32_t n = pattern.n;
    std::vector<std::int32_t> order;
    order.reserve(n);
    std::vector<std::int32_t> stamp(n, -1);
    std::int32_t epoch = 0;

    std::vector<std::int32_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    std::function<void(std::vector<std::int32_t>&)> recurse = [&](std::vector<std::int32_t>& nodes) {
        if (nodes.size() <= 64) {
            std::sort(nodes.begin(), nodes.end());
            order.insert(order.end(), nodes.begin(), nodes.end());
            return;
        }
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (std::int32_t v : nodes) {
            xmin = std::min(xmin, pts[v].x);
            xmax = std::max(xmax, pts[v].x);
            ymin = std::min(ymin, pts[v].y);
            ymax = std::max(ymax, pts[v].y);
        }
        const bool by_x = (xmax - xmin) >= (ymax - ymin);
        std::sort(nodes.begin(), nodes.end(), [&](std::int32_t a, std::int32_t b) {
            const double ca = by_x ? pts[a].x : pts[a].y;
            const double cb = by_x ? pts[b].x : pts[b].y;
            return ca != cb ? ca < cb : a < b;
        });
        const std::size_t mid = nodes.size() / 2;
        std::vector<std::int32_t> half_a(nodes.begin(), nodes.begin() + mid);
        std::vector<std::int32_t> half_b(nodes.begin() + mid, nodes.end());

        const std::int32_t eb = epoch++;
        for (std::int32_t v : half_b) stamp[v] = eb;
        std::vector<std::int32_t> sep, interior;
        interior.reserve(half_a.size());
        for (std::int32_t v : half_a) {
            bool touches_b = false;
            for (std::int64_t p = pattern.row_ptr[v]; p < pattern.row_ptr[v + 1]; ++p)
                if (stamp[pattern.col[p]] == eb) {
                    touches_b = true;
                    break;
                }
            (touches_b ? sep : interior).push_back(v);
        }
        recurse(interior);
        recurse(half_b);
        std::sort(sep.begin(), sep.end());
        order.insert(order.end(), sep.begin(), sep.end());
    };
    recurse(all);
    return order;
}

// reverse Cuthill-McKee fallback when no coordinates are available
inline std::vector<std::int32_t> rcm_order(const Csr& pattern) {
    const std::int32_t n = pattern.n;
    std::vector<std::int32_t> degree(n);
    for (std::int32_t i = 0; i < n; ++i)
        degree[i] = static_cast<std::int32_t>(pattern.row_ptr[i + 1] - pattern.row_ptr[i]);
    std::vector<std::int32_t> order;
    order.reserve(n);
    std::vector<char> visited(n, 0);
    for (;;) {
        std::int32_t start = -1;
        for (std::int32_t i = 0; i < n; ++i)
            if (!visited[i] && (start < 0 || degree[i] < degree[start])) start = i;
        if (start < 0) break;
        std::size_t head = order.size();
        order.push_back(start);
        visited[start] = 1;
        while (head < order.size()) {
            const std::int32_t v = order[head++];
            std::vector<std::int32_t> nbrs;
            for (std::int64_t p = pattern.row_ptr[v]; p < pattern.row_ptr[v + 1]; ++p) {
                const std::int32_t w = pattern.col[p];
                if (w != v && !visited[w]) {
                    visited[w] = 1;
                    nbrs.push_back(w);
                }
            }
            std::sort(nbrs.begin(), nbrs.end(), [&](std::int32_t a, std::int32_t b) {
                return degree[a] != degree[b] ? degree[a] < degree[b] : a < b;
            });
            order.insert(order.end(), nbrs.begin(), nbrs.end());
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

struct CscUpper {
    std::int32_t n = 0;
    std::vector<std::int64_t> col_ptr;
    std::vector<std::int32_t> row;
    std::vector<double> val;
};

// upper triangle of the symmetrically scaled and permuted matrix
// P (S A S) P^T in compressed-column form; S = diag(scale)
inline CscUpper permuted_upper(const Csr& a, const std::vector<std::int32_t>& inv_perm,
                               const std::vector<double>& scale) {
    CscUpper u;
    u.n = a.n;
    u.col_ptr.assign(a.n + 1, 0);
    for (std::int32_t i = 0; i < a.n; ++i)
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            const std::int32_t j = a.col[p];
            if (j < i) continue; // take each undirected pair once
            std::int32_t r = inv_perm[i], c = inv_perm[j];
            if (r > c) std::swap(r, c);
            ++u.col_ptr[c + 1];
        }
    for (std::int32_t c = 0; c < a.n; ++c) u.col_ptr[c + 1] += u.col_ptr[c];
    u.row.resize(u.col_ptr[a.n]);
    u.val.resize(u.col_ptr[a.n]);
    std::vector<std::int64_t> next(u.col_ptr.begin(), u.col_ptr.end() - 1);
    for (std::int32_t i = 0; i < a.n; ++i)
        for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            const std::int32_t j = a.col[p];
            if (j < i) continue;
            std::int32_t r = inv_perm[i], c = inv_perm[j];
            if (r > c) std::swap(r, c);
            u.row[next[c]] = r;
            u.val[next[c]] = a.val[p] * scale[i] * scale[j];
            ++next[c];
        }
    return u;
}

inline std::vector<std::int32_t> elimination_tree(const CscUpper& a) {
    const std::int32_t n = a.n;
    std::vector<std::int32_t> parent(n, -1), ancestor(n, -1);
    for (std::int32_t k = 0; k < n; ++k)
        for (std::int64_t p = a.col_ptr[k]; p < a.col_ptr[k + 1]; ++p) {
            std::int32_t i = a.row[p];
            while (i != -1 && i < k) {
                const std::int32_t inext = ancestor[i];
                ancestor[i] = k;
                if (inext == -1) parent[i] = k;
                i = inext;
            }
        }
    return parent;
}

// nonzero pattern of row k of L in topological order; returns the start
// index into s (pattern occupies s[top..n-1])
inline std::int32_t ereach(const CscUpper& a, std::int32_t k, const std::vector<std::int32_t>& parent,
                           std::vector<std::int32_t>& s, std::vector<std::int32_t>& mark,
                           std::vector<std::int32_t>& scratch) {
    std::int32_t top = a.n;
    mark[k] = k;
    for (std::int64_t p = a.col_ptr[k]; p < a.col_ptr[k + 1]; ++p) {
        std::int32_t i = a.row[p];
        if (i >= k) continue;
        std::int32_t len = 0;
        while (mark[i] != k) {
            scratch[len++] = i;
            mark[i] = k;
            i = parent[i];
        }
        while (len > 0) s[--top] = scratch[--len];
    }
    return top;
}

} // namespace solver_detail

/******************************************************************************
Sparse Cholesky factorization P A P^T = L L^T with a fill-reducing ordering
(geometric nested dissection when DOF coordinates are available, reverse
Cuthill-McKee otherwise). Up-looking numeric phase over the elimination tree.
Factorizations are immutable; concurrent solves are safe.
******************************************************************************/
class Factorization {
public:
    Factorization(const SparseSpdSystem& sys, const std::vector<Vec2>* dof_coords = nullptr) {
        n_ = sys.n;
        a_ = sys.mat; // kept for iterative refinement
        if (n_ == 0) throw std::invalid_argument("factorize: empty system");

        // symmetric diagonal equilibration: strongly graded meshes put many
        // orders of magnitude between element scales, and the scaled matrix
        // factors reliably where the raw one loses definiteness to roundoff
        scale_.assign(n_, 1.0);
        for (std::int32_t i = 0; i < n_; ++i) {
            const double d = a_.entry(i, i);
            if (!(d > 0.0)) throw NotSpdError("factorize: matrix not SPD (nonpositive diagonal at " +
                                              std::to_string(i) + ")");
            scale_[i] = 1.0 / std::sqrt(d);
        }

        std::vector<std::int32_t> order =
            dof_coords ? solver_detail::nd_order(sys.mat, *dof_coords) : solver_detail::rcm_order(sys.mat);
        perm_ = order; // perm_[new] = old
        inv_perm_.assign(n_, 0);
        for (std::int32_t k = 0; k < n_; ++k) inv_perm_[perm_[k]] = k;

        const solver_detail::CscUpper up = solver_detail::permuted_upper(a_, inv_perm_, scale_);
        parent_ = solver_detail::elimination_tree(up);

        // pass 1: column counts of L
        std::vector<std::int32_t> s(n_), mark(n_, -1), scratch(n_);
        std::vector<std::int64_t> count(n_, 1); // diagonal
        for (std::int32_t k = 0; k < n_; ++k) {
            const std::int32_t top = solver_detail::ereach(up, k, parent_, s, mark, scratch);
            for (std::int32_t t = top; t < n_; ++t) ++count[s[t]];
        }
        lp_.assign(n_ + 1, 0);
        for (std::int32_t j = 0; j < n_; ++j) lp_[j + 1] = lp_[j] + count[j];
        li_.resize(lp_[n_]);
        lx_.resize(lp_[n_]);

        // pass 2: numeric factorization (up-looking)
        std::fill(mark.begin(), mark.end(), -1);
        std::vector<std::int64_t> next(n_);
        std::vector<double> x(n_, 0.0);
        for (std::int32_t k = 0; k < n_; ++k) {
            const std::int32_t top = solver_detail::ereach(up, k, parent_, s, mark, scratch);
            double d = 0.0;
            for (std::int64_t p = up.col_ptr[k]; p < up.col_ptr[k + 1]; ++p) {
                const std::int32_t i = up.row[p];
                if (i < k) x[i] = up.val[p];
                else if (i == k) d = up.val[p];
            }
            for (std::int32_t t = top; t < n_; ++t) {
                const std::int32_t j = s[t];
                const double lkj = x[j] / lx_[lp_[j]];
                x[j] = 0.0;
                for (std::int64_t p = lp_[j] + 1; p < next[j]; ++p) x[li_[p]] -= lx_[p] * lkj;
                d -= lkj * lkj;
                li_[next[j]] = k;
                lx_[next[j]] = lkj;
                ++next[j];
            }
            // the scaled matrix has unit diagonal, so a decisively negative
            // pivot means a genuinely indefinite input; pivots lost to
            // roundoff (condition beyond ~1e15) are boosted and counted,
            // leaving accuracy to iterative refinement
            if (d <= -1e-10)
                throw NotSpdError("factorize: matrix not SPD (nonpositive pivot at column " +
                                  std::to_string(k) + ")");
            if (d < 1e-12) {
                d = 1e-12;
                ++clamped_pivots_;
            }
            li_[lp_[k]] = k;
            lx_[lp_[k]] = std::sqrt(d);
            next[k] = lp_[k] + 1;
        }
    }

    std::int32_t size() const { return n_; }
    std::int64_t nnz_factor() const { return static_cast<std::int64_t>(lx_.size()); }
    int clamped_pivots() const { return clamped_pivots_; }

    // sampled reconstruction of A_{ij} from the factorization, undoing the
    // permutation and the diagonal scaling
    double reconstructed_entry(std::int32_t i, std::int32_t j) const {
        std::vector<double> li_col = dense_l_row(inv_perm_[i]);
        std::vector<double> lj_col = dense_l_row(inv_perm_[j]);
        double s = 0.0;
        for (std::int32_t k = 0; k < n_; ++k) s += li_col[k] * lj_col[k];
        return s / (scale_[i] * scale_[j]);
    }

    // solve A x = b to a relative residual of 1e-10, with iterative
    // refinement against the stored matrix if needed
    std::vector<double> solve(const std::vector<double>& b) const {
        if (static_cast<std::int32_t>(b.size()) != n_)
            throw std::invalid_argument("solve: dimension mismatch");
        std::vector<double> x = solve_once(b);
        const double bnorm = norm2(b);
        if (bnorm == 0.0) return std::vector<double>(n_, 0.0);
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<double> r = a_.matvec(x);
            for (std::int32_t i = 0; i < n_; ++i) r[i] = b[i] - r[i];
            if (norm2(r) <= 1e-10 * bnorm) break;
            const std::vector<double> dx = solve_once(r);
            for (std::int32_t i = 0; i < n_; ++i) x[i] += dx[i];
        }
        return x;
    }

    double relative_residual(const std::vector<double>& x, const std::vector<double>& b) const {
        std::vector<double> r = a_.matvec(x);
        for (std::int32_t i = 0; i < n_; ++i) r[i] = b[i] - r[i];
        const double bn = norm2(b);
        return bn == 0.0 ? norm2(r) : norm2(r) / bn;
    }

private:
    static double norm2(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    std::vector<double> dense_l_row(std::int32_t r) const {
        std::vector<double> out(n_, 0.0);
        for (std::int32_t j = 0; j <= r; ++j)
            for (std::int64_t p = lp_[j]; p < lp_[j + 1]; ++p)
                if (li_[p] == r) out[j] = lx_[p];
        return out;
    }

    std::vector<double> solve_once(const std::vector<double>& b) const {
        std::vector<double> x(n_);
        for (std::int32_t k = 0; k < n_; ++k) x[k] = b[perm_[k]] * scale_[perm_[k]];
        // forward L y = S P b
        for (std::int32_t j = 0; j < n_; ++j) {
            x[j] /= lx_[lp_[j]];
            for (std::int64_t p = lp_[j] + 1; p < lp_[j + 1]; ++p) x[li_[p]] -= lx_[p] * x[j];
        }
        // backward L^T z = y
        for (std::int32_t j = n_ - 1; j >= 0; --j) {
            for (std::int64_t p = lp_[j] + 1; p < lp_[j + 1]; ++p) x[j] -= lx_[p] * x[li_[p]];
            x[j] /= lx_[lp_[j]];
        }
        std::vector<double> out(n_);
        for (std::int32_t k = 0; k < n_; ++k) out[perm_[k]] = x[k] * scale_[perm_[k]];
        return out;
    }

    std::int32_t n_ = 0;
    int clamped_pivots_ = 0;
    Csr a_;
    std::vector<double> scale_;
    std::vector<std::int32_t> perm_, inv_perm_, parent_;
    std::vector<std::int64_t> lp_;
    std::vector<std::int32_t> li_;
    std::vector<double> lx_;
};

inline Factorization factorize(const SparseSpdSystem& sys, const std::vector<Vec2>* dof_coords = nullptr) {
    return Factorization(sys, dof_coords);
}

inline std::vector<double> solve(const Factorization& fact, const std::vector<double>& rhs) {
    return fact.solve(rhs);
}

// Jacobi-preconditioned conjugate gradients; memory-light alternative to the
// direct path, relative residual 1e-10, at most 10 n iterations
inline std::vector<double> solve_cg(const SparseSpdSystem& sys, const std::vector<double>& b,
                                    double tol = 1e-10) {
    const std::int32_t n = sys.n;
    if (static_cast<std::int32_t>(b.size()) != n) throw std::invalid_argument("solve_cg: dimension mismatch");
    std::vector<double> diag(n, 1.0);
    for (std::int32_t i = 0; i < n; ++i) {
        const double d = sys.mat.entry(i, i);
        if (d <= 0.0) throw NotSpdError("solve_cg: nonpositive diagonal");
        diag[i] = 1.0 / d;
    }
    auto dot_v = [](const std::vector<double>& a, const std::vector<double>& c) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * c[i];
        return s;
    };
    std::vector<double> x(n, 0.0), r = b, z(n), p(n);
    const double bnorm = std::sqrt(dot_v(b, b));
    if (bnorm == 0.0) return x;
    for (std::int32_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
    p = z;
    double rz = dot_v(r, z);
    const std::int64_t max_iter = static_cast<std::int64_t>(10) * n;
    for (std::int64_t it = 0; it < max_iter; ++it) {
        const std::vector<double> ap = sys.mat.matvec(p);
        const double alpha = rz / dot_v(p, ap);
        for (std::int32_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if (std::sqrt(dot_v(r, r)) <= tol * bnorm) return x;
        for (std::int32_t i = 0; i < n; ++i) z[i] = diag[i] * r[i];
        const double rz_new = dot_v(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::int32_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw std::runtime_error("solve_cg: did not converge within 10 n iterations");
}

// coordinates used by the fill-reducing ordering: edge midpoints for RT
// DOFs, vertex positions for S1 DOFs
inline std::vector<Vec2> dof_coordinates(const Mesh& m, const DofMap& dof) {
    std::vector<Vec2> pts;
    pts.reserve(dof.n_total());
    for (const auto& e : dof.edges) pts.push_back((m.vertices[e.a] + m.vertices[e.b]) * 0.5);
    for (std::size_t v = 0; v < m.vertices.size(); ++v)
        if (dof.vertex_dof[v] >= 0) pts.push_back(m.vertices[v]);
    return pts;
}

} // namespace zlsfem
