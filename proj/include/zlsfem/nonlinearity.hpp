#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "zlsfem/geometry.hpp"

namespace zlsfem {

enum class NonlinearityKind { convex_energy, forchheimer, linear_identity };

/******************************************************************************
Nonlinear flux sigma(xi) = phi(|xi|) xi with uniformly elliptic and bounded
derivative: Lambda_1 |a|^2 <= (Dsigma(xi) a) . a and
|(Dsigma(xi) a) . b| <= Lambda_2 |a| |b|.

For the Forchheimer law the bounds hold on |xi| <= grad_bound only; the
algorithms never clamp gradients, they just log the max gradient norm so a
run can be checked against that bound.
******************************************************************************/
struct Nonlinearity {
    NonlinearityKind kind = NonlinearityKind::linear_identity;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    // forchheimer parameters
    double k1 = 0.0;
    double k2 = 0.0;
    double grad_bound = 0.0;

    double phi(double t) const {
        switch (kind) {
            case NonlinearityKind::convex_energy: return 2.0 + 1.0 / (1.0 + t);
            case NonlinearityKind::forchheimer: return 2.0 / (k1 + std::sqrt(k1 * k1 + k2 * t));
            case NonlinearityKind::linear_identity: return 1.0;
        }
        return 1.0;
    }

    double dphi(double t) const {
        switch (kind) {
            case NonlinearityKind::convex_energy: {
                const double s = 1.0 + t;
                return -1.0 / (s * s);
            }
            case NonlinearityKind::forchheimer: {
                const double root = std::sqrt(k1 * k1 + k2 * t);
                const double den = (k1 + root) * (k1 + root) * root;
                return -k2 / den;
            }
            case NonlinearityKind::linear_identity: return 0.0;
        }
        return 0.0;
    }

    // phi(t) + t phi'(t), the radial derivative of t phi(t)
    double phi_bar(double t) const { return phi(t) + t * dphi(t); }

    Vec2 sigma(Vec2 xi) const {
        const double r = norm(xi);
        return phi(r) * xi;
    }

    // Dsigma(xi) = phi(|xi|) I + phi'(|xi|)|xi| (xi/|xi|) (x) (xi/|xi|);
    // the limit phi(0) I is used at xi = 0 (phi is C^1 at 0 here)
    Mat2 dsigma(Vec2 xi) const {
        const double r = norm(xi);
        if (r == 0.0) return Mat2::identity(phi(0.0));
        const Vec2 u = xi / r;
        const double c = dphi(r) * r;
        Mat2 d = Mat2::identity(phi(r));
        d.m[0][0] += c * u.x * u.x;
        d.m[0][1] += c * u.x * u.y;
        d.m[1][0] += c * u.y * u.x;
        d.m[1][1] += c * u.y * u.y;
        return d;
    }
};

inline Nonlinearity make_convex_energy() {
    Nonlinearity nl;
    nl.kind = NonlinearityKind::convex_energy;
    nl.lambda1 = 2.0;
    nl.lambda2 = 3.0;
    return nl;
}

// Ellipticity bound used for the Forchheimer weights,
// 2 k1 / ((k1 + sqrt(k1^2 + k2 t)) sqrt(k1^2 + k2 t)); a lower bound of the
// radial derivative phi + t phi' = 1/sqrt(k1^2 + k2 t) on [0, t], not sharp
inline double forchheimer_ellipticity_bound(double k1, double k2, double t) {
    const double root = std::sqrt(k1 * k1 + k2 * t);
    return 2.0 * k1 / ((k1 + root) * root);
}

// Lambda_1 = ellipticity bound at grad_bound, Lambda_2 = 1/k1; the bounds
// are valid for |grad u| <= grad_bound
inline Nonlinearity make_forchheimer(double k1, double k2, double grad_bound) {
    if (k1 <= 0.0 || k2 <= 0.0 || grad_bound <= 0.0)
        throw std::invalid_argument("make_forchheimer: parameters must be positive");
    Nonlinearity nl;
    nl.kind = NonlinearityKind::forchheimer;
    nl.k1 = k1;
    nl.k2 = k2;
    nl.grad_bound = grad_bound;
    nl.lambda2 = 1.0 / k1;
    nl.lambda1 = forchheimer_ellipticity_bound(k1, k2, grad_bound);
    return nl;
}

inline Nonlinearity make_linear_identity() {
    Nonlinearity nl;
    nl.kind = NonlinearityKind::linear_identity;
    nl.lambda1 = 1.0;
    nl.lambda2 = 1.0;
    return nl;
}

enum class SchemeKind { emphasized_gradient, balanced, downscaled_flux, split };

inline const char* scheme_name(SchemeKind s) {
    switch (s) {
        case SchemeKind::emphasized_gradient: return "emphasized-gradient";
        case SchemeKind::balanced: return "balanced";
        case SchemeKind::downscaled_flux: return "downscaled-flux";
        case SchemeKind::split: return "split";
    }
    return "?";
}

inline SchemeKind scheme_from_name(const std::string& s) {
    if (s == "emphasized-gradient") return SchemeKind::emphasized_gradient;
    if (s == "balanced") return SchemeKind::balanced;
    if (s == "downscaled-flux") return SchemeKind::downscaled_flux;
    if (s == "split") return SchemeKind::split;
    throw std::invalid_argument("unknown weighting scheme: " + s);
}

/******************************************************************************
Unified weighting triple (w1, a, b): the constitutive residual is
a p - b grad u (+ data terms) and the divergence residual carries w1 C_F.

All four weightings share b / a = Lambda_2^2 / Lambda_1 and w1^2 = 2 b /
Lambda_1; they differ in the flux scale a:

  emphasized-gradient  a = 1                   (residual p - w2^2 grad u)
  balanced             a = sqrt(L1)/L2         (w2^-1 p - w2 grad u)
  downscaled-flux      a = L1/L2^2             (w2^-2 p - grad u)
  split                a = L1                  (L1 p - L2^2 grad u)
******************************************************************************/
struct WeightedScheme {
    SchemeKind scheme = SchemeKind::emphasized_gradient;
    double w1 = 0.0;   // sqrt(w1sq), used where the weight enters linearly
    double w1sq = 0.0; // 2 b / Lambda_1, the primary quantity
    double a = 0.0;
    double b = 0.0;

    double w1_sq() const { return w1sq; }
};

inline WeightedScheme compute_weights(SchemeKind scheme, double lambda1, double lambda2) {
    if (!(lambda1 > 0.0) || !(lambda2 >= lambda1))
        throw std::invalid_argument("compute_weights: need 0 < Lambda_1 <= Lambda_2");
    WeightedScheme ws;
    ws.scheme = scheme;
    switch (scheme) {
        case SchemeKind::emphasized_gradient: ws.a = 1.0; break;
        case SchemeKind::balanced: ws.a = std::sqrt(lambda1) / lambda2; break;
        case SchemeKind::downscaled_flux: ws.a = lambda1 / (lambda2 * lambda2); break;
        case SchemeKind::split: ws.a = lambda1; break;
    }
    ws.b = ws.a * lambda2 * lambda2 / lambda1;
    ws.w1sq = 2.0 * ws.b / lambda1;
    ws.w1 = std::sqrt(ws.w1sq);
    return ws;
}

/******************************************************************************
Strong-monotonicity and Lipschitz constants of the linearization operator in
the least-squares norm, per scheme, together with the damping threshold
delta* = 2 alpha / L^2 and the classical Zarantonello contraction factor
rho(delta) = sqrt(1 - 2 delta alpha + delta^2 L^2).
******************************************************************************/
struct ContractionConstants {
    double alpha_ls = 0.0;
    double l_ls = 0.0;
    double delta_star = 0.0;

    bool delta_in_range(double delta) const { return delta > 0.0 && delta < delta_star; }

    // clamped to [0, 1); values of delta outside (0, delta*) carry no
    // contraction guarantee but the formula is still evaluated
    double rho_z(double delta) const {
        const double s = 1.0 - 2.0 * delta * alpha_ls + delta * delta * l_ls * l_ls;
        if (s <= 0.0) return 0.0;
        const double r = std::sqrt(s);
        return std::min(r, std::nextafter(1.0, 0.0));
    }
};

inline ContractionConstants contraction_constants(SchemeKind scheme, double lambda1, double lambda2) {
    const WeightedScheme ws = compute_weights(scheme, lambda1, lambda2);
    const double l1 = lambda1, l2 = lambda2;

    // constants with respect to the weighted product norm
    double alpha_w = 0.0, lip_w = 0.0;
    switch (scheme) {
        case SchemeKind::emphasized_gradient:
            alpha_w = std::min(0.5, l1 * l1 / (4.0 * l2 * l2));
            lip_w = 4.0;
            break;
        case SchemeKind::balanced:
            alpha_w = std::min({0.5, l2 / std::sqrt(l1), std::pow(l1, 1.5) / (4.0 * l2)});
            lip_w = 4.0 * std::max({1.0, l2 / std::sqrt(l1), std::pow(l1, 1.5) / (2.0 * l2)});
            break;
        case SchemeKind::downscaled_flux:
            alpha_w = std::min({0.5, l2 * l2 / (2.0 * l1), l1 / 4.0});
            lip_w = 4.0 * std::max({1.0, l2 * l2 / l1, l2, std::sqrt(l1) / std::sqrt(2.0)});
            break;
        case SchemeKind::split:
            alpha_w = std::min({0.5, 1.0 / (2.0 * l1), l1 / (4.0 * l2 * l2)});
            lip_w = 4.0 * std::max({1.0, 1.0 / l1, 1.0 / l2, l1 / (2.0 * l2 * l2)});
            break;
    }

    // two-sided norm equivalence transfers them to the least-squares norm
    const double ratio = 4.0 * ws.a * ws.a / ws.w1sq;
    ContractionConstants cc;
    cc.alpha_ls = 0.5 * alpha_w;
    cc.l_ls = lip_w * std::max(2.0, 1.0 + ratio);
    cc.delta_star = 2.0 * cc.alpha_ls / (cc.l_ls * cc.l_ls);
    return cc;
}

// lower constant of the fundamental equivalence between the least-squares
// norm and the weighted product norm (the upper constant is 2)
inline double equivalence_lower_constant(const WeightedScheme& ws) {
    const double ratio = 4.0 * ws.a * ws.a / ws.w1_sq();
    return std::min(0.5, 1.0 / (1.0 + ratio));
}

} // namespace zlsfem
