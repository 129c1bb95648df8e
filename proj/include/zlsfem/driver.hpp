#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zlsfem/assembly.hpp"
#include "zlsfem/estimator.hpp"
#include "zlsfem/linear_solver.hpp"

namespace zlsfem {

struct AlgorithmParams {
    double delta = 1.0;  // damping of the linearization step
    double gamma = 0.9;  // inner stopping parameter, eta_k <= gamma^k
    double theta = 0.3;  // bulk marking parameter
    double tau = 0.0;    // tolerance of the linear algorithm
    std::int64_t max_total_dofs = 200000;
    int max_outer_iters = 60;
    SchemeKind scheme = SchemeKind::emphasized_gradient;

    void validate() const {
        if (!(delta > 0.0)) throw std::invalid_argument("params: delta must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("params: gamma must be in (0,1)");
        if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("params: theta must be in (0,1]");
        if (!(tau >= 0.0)) throw std::invalid_argument("params: tau must be nonnegative");
        if (max_total_dofs <= 0 || max_outer_iters <= 0)
            throw std::invalid_argument("params: budgets must be positive");
    }
};

struct RunRow {
    int k = 0;
    int ell = 0;
    std::int64_t n_elem = 0;
    std::int64_t n_rt = 0;
    std::int64_t n_s1 = 0;
    double eta = 0.0;
    double mu = 0.0;
    double nfun = 0.0;      // sqrt of the nonlinear least-squares functional
    double grad_inf = 0.0;  // max |grad u_h|
    std::int64_t marked = 0;
    bool accepted = false;
    double wall_ms = 0.0;
};

struct RunRecord {
    std::vector<RunRow> rows;
    bool budget_flagged = false;
    std::string stop_reason; // "tolerance", "budget-dofs", "budget-outer"
    int n_factorizations = 0;
    int n_distinct_meshes = 0;
    MeshPtr final_mesh;
    DiscreteSolution final_solution;

    const RunRow* last_accepted() const {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it)
            if (it->accepted) return &*it;
        return nullptr;
    }
};

using RowSink = std::function<void(const RunRow&)>;
// per-level indicator hook (debug dumps); mu report is empty for linear runs
using IndicatorSink = std::function<void(int k, int ell, const EstimatorReport& eta, const EstimatorReport& mu)>;

// One damped linearization step on a fixed mesh: the unique minimizer of the
// step functional Z_k, computed with a previously built factorization.
inline DiscreteSolution zarantonello_step(const Mesh& m, const DofMap& dof, const Factorization& fact,
                                          const WeightedScheme& ws, double c_f, double delta,
                                          const DiscreteSolution& prev, const ProblemSpec& problem) {
    const std::vector<double> rhs = assemble_zarantonello_rhs(m, dof, ws, c_f, delta, prev, problem);
    return from_vector(m, dof, fact.solve(rhs));
}

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/******************************************************************************
Adaptive least-squares FEM for the linear problem: solve, estimate, stop once
eta <= tau, otherwise bulk-mark on the local indicators and refine. With
tau = 0 the loop runs until the DOF budget is exhausted.
******************************************************************************/
inline RunRecord run_alsfem_linear(MeshPtr mesh, const ScalarField& g1, const VectorField& g2,
                                   const WeightedScheme& ws, double c_f, const AlgorithmParams& params,
                                   const RowSink& sink = {}, const IndicatorSink& indicators = {}) {
    params.validate();
    if (params.tau == 0.0 && params.max_total_dofs <= 0)
        throw std::invalid_argument("run_alsfem_linear: tau = 0 requires a DOF budget");

    RunRecord rec;
    for (int ell = 0;; ++ell) {
        const auto t0 = std::chrono::steady_clock::now();
        const DofMap dof = build_dof_map(*mesh);
        const SparseSpdSystem sys = assemble_system(*mesh, dof, ws, c_f);
        const std::vector<Vec2> coords = dof_coordinates(*mesh, dof);
        const Factorization fact = factorize(sys, &coords);
        ++rec.n_factorizations;
        ++rec.n_distinct_meshes;
        const std::vector<double> rhs = assemble_linear_ls_rhs(*mesh, dof, ws, c_f, g1, g2);
        const DiscreteSolution sol = from_vector(*mesh, dof, fact.solve(rhs));
        const EstimatorReport eta = linear_eta(*mesh, dof, ws, c_f, g1, g2, sol);
        if (indicators) indicators(0, ell, eta, EstimatorReport{});

        RunRow row;
        row.k = 0;
        row.ell = ell;
        row.n_elem = static_cast<std::int64_t>(mesh->tris.size());
        row.n_rt = dof.n_rt;
        row.n_s1 = dof.n_s1;
        row.eta = eta.global();
        row.mu = 0.0;
        row.nfun = eta.global();
        row.grad_inf = grad_inf_norm(*mesh, dof, sol);

        if (eta.global() <= params.tau) {
            row.accepted = true;
            row.wall_ms = detail::ms_since(t0);
            rec.rows.push_back(row);
            if (sink) sink(row);
            rec.stop_reason = "tolerance";
            rec.final_mesh = mesh;
            rec.final_solution = sol;
            return rec;
        }

        const MarkedSet marked = doerfler_mark(eta.local2, params.theta);
        row.marked = static_cast<std::int64_t>(marked.indices.size());

        MeshPtr fine = refine_nvb(mesh, marked);
        const DofMap fdof = build_dof_map(*fine);
        if (fdof.n_total() > params.max_total_dofs) {
            row.accepted = true;
            row.wall_ms = detail::ms_since(t0);
            rec.rows.push_back(row);
            if (sink) sink(row);
            rec.budget_flagged = true;
            rec.stop_reason = "budget-dofs";
            rec.final_mesh = mesh;
            rec.final_solution = sol;
            return rec;
        }
        row.wall_ms = detail::ms_since(t0);
        rec.rows.push_back(row);
        if (sink) sink(row);
        mesh = fine;
    }
}

/******************************************************************************
Adaptive Zarantonello least-squares FEM: an outer linearization loop around
an inner adaptive refinement loop. The inner loop solves the damped step on
the current mesh, stops once eta_k <= gamma^k, otherwise marks on the local
eta_k indicators and refines, prolongating the previous accepted iterate
exactly. Nested iteration restarts the next outer step on the accepted mesh,
so one factorization serves all linearization steps on that mesh.
******************************************************************************/
inline RunRecord run_adaptive_zarantonello(MeshPtr mesh, const ProblemSpec& problem,
                                           const AlgorithmParams& params, const RowSink& sink = {},
                                           const IndicatorSink& indicators = {}) {
    params.validate();
    RunRecord rec;

    DofMap dof = build_dof_map(*mesh);
    const WeightedScheme ws = compute_weights(params.scheme, problem.nl.lambda1, problem.nl.lambda2);
    if (dof.n_total() > params.max_total_dofs)
        throw std::invalid_argument("run_adaptive_zarantonello: initial mesh exceeds the DOF budget");

    SparseSpdSystem sys = assemble_system(*mesh, dof, ws, problem.c_f);
    std::vector<Vec2> coords = dof_coordinates(*mesh, dof);
    std::optional<Factorization> fact(factorize(sys, &coords));
    rec.n_factorizations = 1;
    rec.n_distinct_meshes = 1;

    DiscreteSolution prev = zero_solution(*mesh, dof); // accepted iterate of step k-1, prolongated

    DiscreteSolution last = prev;
    for (int k = 1; k <= params.max_outer_iters; ++k) {
        const double threshold = std::pow(params.gamma, k);
        for (int ell = 0;; ++ell) {
            const auto t0 = std::chrono::steady_clock::now();
            const DiscreteSolution cur =
                zarantonello_step(*mesh, dof, *fact, ws, problem.c_f, params.delta, prev, problem);
            const EstimatorReport eta =
                eta_k(*mesh, dof, ws, problem.c_f, params.delta, prev, cur, problem);
            const EstimatorReport mu = mu_k(*mesh, dof, ws, problem.c_f, prev, cur);
            const EstimatorReport nfun = nonlinear_functional(*mesh, dof, problem, problem.c_f, cur);
            if (indicators) indicators(k, ell, eta, mu);

            RunRow row;
            row.k = k;
            row.ell = ell;
            row.n_elem = static_cast<std::int64_t>(mesh->tris.size());
            row.n_rt = dof.n_rt;
            row.n_s1 = dof.n_s1;
            row.eta = eta.global();
            row.mu = mu.global();
            row.nfun = nfun.global();
            row.grad_inf = grad_inf_norm(*mesh, dof, cur);
            last = cur;

            if (eta.global() <= threshold) {
                row.accepted = true;
                row.wall_ms = detail::ms_since(t0);
                rec.rows.push_back(row);
                if (sink) sink(row);
                prev = cur; // nested iteration: next outer step starts here
                break;
            }

            const MarkedSet marked = doerfler_mark(eta.local2, params.theta);
            row.marked = static_cast<std::int64_t>(marked.indices.size());

            MeshPtr fine = refine_nvb(mesh, marked);
            DofMap fdof = build_dof_map(*fine);
            if (fdof.n_total() > params.max_total_dofs) {
                row.wall_ms = detail::ms_since(t0);
                rec.rows.push_back(row);
                if (sink) sink(row);
                rec.budget_flagged = true;
                rec.stop_reason = "budget-dofs";
                rec.final_mesh = mesh;
                rec.final_solution = cur;
                return rec;
            }
            row.wall_ms = detail::ms_since(t0);
            rec.rows.push_back(row);
            if (sink) sink(row);

            prev = prolongate(prev, mesh, fine, fdof);
            mesh = fine;
            dof = std::move(fdof);
            sys = assemble_system(*mesh, dof, ws, problem.c_f);
            coords = dof_coordinates(*mesh, dof);
            fact.emplace(factorize(sys, &coords));
            ++rec.n_factorizations;
            ++rec.n_distinct_meshes;
        }
    }
    rec.budget_flagged = true;
    rec.stop_reason = "budget-outer";
    rec.final_mesh = mesh;
    rec.final_solution = last;
    return rec;
}

} // namespace zlsfem
