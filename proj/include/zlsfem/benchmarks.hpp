#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "zlsfem/driver.hpp"

namespace zlsfem {

// Friedrichs constant of the L-shape (-1,1)^2 \ [0,1)^2, from a guaranteed
// lower bound of the first Dirichlet eigenvalue
inline constexpr double c_f_l_shape = 0.32208292665417854;
// unit square: lambda_1 = 2 pi^2, hence C_F = 1 / (sqrt(2) pi)
inline const double c_f_unit_square = 1.0 / (std::sqrt(2.0) * 3.14159265358979323846);

enum class BenchmarkKind { convex_energy, porous_media, linear_manufactured };

inline const char* benchmark_name(BenchmarkKind b) {
    switch (b) {
        case BenchmarkKind::convex_energy: return "convex-energy";
        case BenchmarkKind::porous_media: return "porous-media";
        case BenchmarkKind::linear_manufactured: return "linear-manufactured";
    }
    return "?";
}

inline BenchmarkKind benchmark_from_name(const std::string& s) {
    if (s == "convex-energy") return BenchmarkKind::convex_energy;
    if (s == "porous-media") return BenchmarkKind::porous_media;
    if (s == "linear-manufactured") return BenchmarkKind::linear_manufactured;
    throw std::invalid_argument("unknown benchmark: " + s);
}

// convex energy minimization: phi(t) = 2 + (1+t)^{-1}, f1 = 1, f2 = 0, L-shape
inline ProblemSpec make_convex_energy_problem(std::optional<double> c_f_override = {}) {
    ProblemSpec p;
    p.domain = Domain::l_shape;
    p.f1 = ScalarField::constant(1.0);
    p.f2 = VectorField::zero();
    p.nl = make_convex_energy();
    p.c_f = c_f_override.value_or(c_f_l_shape);
    return p;
}

// porous media flow (Forchheimer law, k1 = 0.2, k2 = 20, gradient bound 1e-2)
// in the standard form -div p_hat = f, p_hat = sigma(grad u); the physical
// velocity is p = -p_hat and is negated back on solution export
inline ProblemSpec make_porous_media_problem(std::optional<double> c_f_override = {}) {
    ProblemSpec p;
    p.domain = Domain::l_shape;
    p.f1 = ScalarField::box(-0.6, -0.4, 0.4, 0.6, 1.0);
    p.f2 = VectorField::zero();
    p.nl = make_forchheimer(0.2, 20.0, 1e-2);
    p.c_f = c_f_override.value_or(c_f_l_shape);
    return p;
}

// smooth manufactured linear problem on the unit square:
// u* = sin(pi x) sin(pi y), p* = grad u*, sigma = identity
inline ProblemSpec make_linear_manufactured_problem(std::optional<double> c_f_override = {}) {
    ProblemSpec p;
    p.domain = Domain::unit_square;
    constexpr double pi = 3.14159265358979323846;
    p.f1 = ScalarField::analytic(
        [](Vec2 x) { return 2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); });
    p.f2 = VectorField::zero();
    p.nl = make_linear_identity();
    p.c_f = c_f_override.value_or(c_f_unit_square);
    return p;
}

inline Vec2 manufactured_exact_flux(Vec2 x) {
    constexpr double pi = 3.14159265358979323846;
    return {pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
}

// Initial mesh of a benchmark. The porous-media source is an indicator with
// a small support, so the L-shape is pre-refined by three uniform passes to
// resolve it before the adaptive loop starts; its element integrals are
// computed exactly by clipping either way.
inline MeshPtr make_benchmark_mesh(BenchmarkKind kind) {
    switch (kind) {
        case BenchmarkKind::convex_energy: return make_l_shape_initial();
        case BenchmarkKind::porous_media: return refine_uniform(make_l_shape_initial(), 3);
        case BenchmarkKind::linear_manufactured: return make_unit_square_initial();
    }
    throw std::logic_error("make_benchmark_mesh");
}

inline ProblemSpec make_benchmark_problem(BenchmarkKind kind, std::optional<double> c_f_override = {}) {
    switch (kind) {
        case BenchmarkKind::convex_energy: return make_convex_energy_problem(c_f_override);
        case BenchmarkKind::porous_media: return make_porous_media_problem(c_f_override);
        case BenchmarkKind::linear_manufactured: return make_linear_manufactured_problem(c_f_override);
    }
    throw std::logic_error("make_benchmark_problem");
}

struct BenchmarkConfig {
    BenchmarkKind benchmark = BenchmarkKind::convex_energy;
    SchemeKind scheme = SchemeKind::emphasized_gradient;
    double delta = 1.0;
    double gamma = 0.9;
    double theta = 0.3;
    std::int64_t max_total_dofs = 200000;
    int max_outer_iters = 60;
    std::optional<double> c_f;
    std::string out = "run.csv";
    std::uint64_t seed = 0;

    AlgorithmParams params() const {
        AlgorithmParams p;
        p.delta = delta;
        p.gamma = gamma;
        p.theta = theta;
        p.max_total_dofs = max_total_dofs;
        p.max_outer_iters = max_outer_iters;
        p.scheme = scheme;
        return p;
    }
};

inline void write_csv_header(std::ostream& os) {
    os << "benchmark,scheme,delta,gamma,theta,k,ell,accepted,n_elem,n_rt,n_s1,"
          "eta,mu,N,grad_inf,marked,wall_ms,budget\n";
}

inline void write_csv_row(std::ostream& os, const BenchmarkConfig& cfg, const RunRow& row,
                          bool budget_flag) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%.17g,%.17g,%.17g,%d,%d,%d,%lld,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%lld,%.0f,%d\n",
                  benchmark_name(cfg.benchmark), scheme_name(cfg.scheme), cfg.delta, cfg.gamma, cfg.theta,
                  row.k, row.ell, row.accepted ? 1 : 0, static_cast<long long>(row.n_elem),
                  static_cast<long long>(row.n_rt), static_cast<long long>(row.n_s1), row.eta, row.mu,
                  row.nfun, row.grad_inf, static_cast<long long>(row.marked), row.wall_ms,
                  budget_flag ? 1 : 0);
    os << buf;
}

inline void write_csv(std::ostream& os, const BenchmarkConfig& cfg, const RunRecord& rec) {
    write_csv_header(os);
    for (std::size_t i = 0; i < rec.rows.size(); ++i) {
        const bool budget = rec.budget_flagged && i + 1 == rec.rows.size();
        write_csv_row(os, cfg, rec.rows[i], budget);
    }
}

// Execute the configured run. The CSV is written to cfg.out unless an
// explicit stream is supplied.
inline RunRecord run_benchmark(const BenchmarkConfig& cfg, std::ostream* csv = nullptr,
                               const RowSink& sink = {}, const IndicatorSink& indicators = {}) {
    const ProblemSpec problem = make_benchmark_problem(cfg.benchmark, cfg.c_f);
    const MeshPtr mesh0 = make_benchmark_mesh(cfg.benchmark);
    const AlgorithmParams params = cfg.params();

    RunRecord rec;
    if (cfg.benchmark == BenchmarkKind::linear_manufactured) {
        const WeightedScheme ws = compute_weights(cfg.scheme, problem.nl.lambda1, problem.nl.lambda2);
        // the identity-sigma first-order system in weighted linear form
        const double w1 = ws.w1;
        const ScalarField f1 = problem.f1;
        const ScalarField g1 =
            ScalarField::analytic([w1, f1](Vec2 x) { return w1 * f1.eval(x); });
        rec = run_alsfem_linear(mesh0, g1, VectorField::zero(), ws, problem.c_f, params, sink, indicators);
    } else {
        rec = run_adaptive_zarantonello(mesh0, problem, params, sink, indicators);
    }

    if (csv) {
        write_csv(*csv, cfg, rec);
    } else {
        std::ofstream os(cfg.out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open output file: " + cfg.out);
        write_csv(os, cfg, rec);
    }
    return rec;
}

// Debugging snapshot of the final iterate; the porous-media flux is negated
// back to the physical sign convention.
inline void export_final_solution(std::ostream& os, const BenchmarkConfig& cfg, const RunRecord& rec) {
    if (!rec.final_mesh.get()) throw std::runtime_error("export_final_solution: no final state");
    DiscreteSolution sol = rec.final_solution;
    if (cfg.benchmark == BenchmarkKind::porous_media)
        for (double& c : sol.rt) c = -c;
    const RunRow* last = rec.rows.empty() ? nullptr : &rec.rows.back();
    write_solution(os, last ? last->k : 0, last ? last->ell : 0, sol);
}

} // namespace zlsfem
