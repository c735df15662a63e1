#pragma once

#include <optional>
#include <span>
#include <string>

#include "fedcanon/vec.hpp"

namespace fedcanon {

enum class RegKind { Zero, L1, Mcp, Scad, Box };

std::string to_string(RegKind k);
RegKind reg_kind_from_string(const std::string& s);

// Separable nonsmooth term h, scaled by kappa. All variants are proper and
// closed; MCP/SCAD are weakly convex with the moduli returned by rho().
//
// Coordinatewise forms (lambda := kappa):
//   l1    : lambda*|z|
//   mcp   : lambda*|z| - z^2/(2*gamma)            for |z| <= gamma*lambda,
//           gamma*lambda^2/2                      beyond
//   scad  : lambda*|z|                            for |z| <= lambda,
//           (2*a*lambda*|z| - z^2 - lambda^2) / (2*(a-1))   for lambda < |z| <= a*lambda,
//           lambda^2*(a+1)/2                      beyond
//   box   : indicator of [lo, hi]
// kappa == 0 degenerates every variant to the zero term (prox = identity).
struct Regularizer {
    RegKind kind = RegKind::Zero;
    double kappa = 0.0;
    double gamma = 2.0;  // mcp, must be > 0
    double a = 3.7;      // scad, must be > 2
    double lo = -1.0;    // box
    double hi = 1.0;

    static Regularizer zero();
    static Regularizer l1(double kappa);
    static Regularizer mcp(double kappa, double gamma = 2.0);
    static Regularizer scad(double kappa, double a = 3.7);
    static Regularizer box(double lo, double hi);

    // Weak-convexity modulus: smallest rho with h + (rho/2)|.|^2 convex.
    double rho() const;

    double value_scalar(double z) const;
    double value(std::span<const double> z) const;

    // prox_{alpha*h}: exact coordinatewise minimizer of h(x) + (x-y)^2/(2*alpha).
    // Requires alpha*rho() < 1.
    double prox_scalar(double alpha, double y) const;
    void prox(double alpha, std::span<const double> y, std::span<double> out) const;
    Vec prox(double alpha, std::span<const double> y) const;

    // sup over z of squared subgradient norm in dimension d; nullopt for the
    // box indicator (unbounded subdifferential at the boundary).
    std::optional<double> subgrad_bound_sq(int d) const;

    void validate() const;                   // parameter sanity (gamma > 0, a > 2, lo <= hi)
    void require_prox_step(double alpha) const;  // throws ConfigError unless 0 < alpha < 1/rho
};

// Brute-force scalar prox: dense grid over [-|y|-span-1, |y|+span+1] refined by
// golden-section search to 1e-10. Independent of the closed forms above; ties
// between numerically equal minimizers resolve toward the smaller magnitude.
double prox_oracle_scalar(const Regularizer& reg, double alpha, double y);

}  // namespace fedcanon
