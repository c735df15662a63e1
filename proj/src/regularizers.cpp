#include "fedcanon/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedcanon/errors.hpp"

namespace fedcanon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double y, double t) {
    if (y > t) return y - t;
    if (y < -t) return y + t;
    return 0.0;
}

}  // namespace

std::string to_string(RegKind k) {
    switch (k) {
        case RegKind::Zero: return "zero";
        case RegKind::L1: return "l1";
        case RegKind::Mcp: return "mcp";
        case RegKind::Scad: return "scad";
        case RegKind::Box: return "box";
    }
    return "?";
}

RegKind reg_kind_from_string(const std::string& s) {
    if (s == "zero") return RegKind::Zero;
    if (s == "l1") return RegKind::L1;
    if (s == "mcp") return RegKind::Mcp;
    if (s == "scad") return RegKind::Scad;
    if (s == "box" || s == "indicator-box") return RegKind::Box;
    throw ConfigError("unknown regularizer variant '" + s + "'");
}

Regularizer Regularizer::zero() { return Regularizer{}; }

Regularizer Regularizer::l1(double kappa) {
    Regularizer r;
    r.kind = RegKind::L1;
    r.kappa = kappa;
    r.validate();
    return r;
}

Regularizer Regularizer::mcp(double kappa, double gamma) {
    Regularizer r;
    r.kind = RegKind::Mcp;
    r.kappa = kappa;
    r.gamma = gamma;
    r.validate();
    return r;
}

Regularizer Regularizer::scad(double kappa, double a) {
    Regularizer r;
    r.kind = RegKind::Scad;
    r.kappa = kappa;
    r.a = a;
    r.validate();
    return r;
}

Regularizer Regularizer::box(double lo, double hi) {
    Regularizer r;
    r.kind = RegKind::Box;
    r.kappa = 1.0;
    r.lo = lo;
    r.hi = hi;
    r.validate();
    return r;
}

void Regularizer::validate() const {
    if (kappa < 0.0) throw ConfigError("regularizer kappa must be >= 0");
    if (kind == RegKind::Mcp && gamma <= 0.0) throw ConfigError("mcp gamma must be > 0");
    if (kind == RegKind::Scad && a <= 2.0) throw ConfigError("scad a must be > 2");
    if (kind == RegKind::Box && lo > hi) throw ConfigError("box requires lo <= hi");
}

double Regularizer::rho() const {
    if (kappa == 0.0) return 0.0;
    switch (kind) {
        case RegKind::Mcp: return 1.0 / gamma;
        case RegKind::Scad: return 1.0 / (a - 1.0);
        default: return 0.0;
    }
}

double Regularizer::value_scalar(double z) const {
    if (kappa == 0.0) return 0.0;
    const double az = std::fabs(z);
    switch (kind) {
        case RegKind::Zero: return 0.0;
        case RegKind::L1: return kappa * az;
        case RegKind::Mcp:
            if (az <= gamma * kappa) return kappa * az - z * z / (2.0 * gamma);
            return gamma * kappa * kappa / 2.0;
        case RegKind::Scad:
            if (az <= kappa) return kappa * az;
            if (az <= a * kappa)
                return (2.0 * a * kappa * az - z * z - kappa * kappa) / (2.0 * (a - 1.0));
            return kappa * kappa * (a + 1.0) / 2.0;
        case RegKind::Box: return (z >= lo && z <= hi) ? 0.0 : kInf;
    }
    return 0.0;
}

double Regularizer::value(std::span<const double> z) const {
    if (kappa == 0.0 || kind == RegKind::Zero) return 0.0;
    double s = 0.0;
    for (double v : z) {
        s += value_scalar(v);
        if (s == kInf) return kInf;
    }
    return s;
}

double Regularizer::prox_scalar(double alpha, double y) const {
    if (kappa == 0.0) return y;
    const double ay = std::fabs(y);
    const double sgn = y < 0.0 ? -1.0 : 1.0;
    switch (kind) {
        case RegKind::Zero: return y;
        case RegKind::L1: return soft_threshold(y, alpha * kappa);
        case RegKind::Mcp: {
            if (ay > gamma * kappa) return y;
            // inner region: strongly convex subproblem needs alpha < gamma
            const double s = soft_threshold(ay, alpha * kappa);
            return sgn * s / (1.0 - alpha / gamma);
        }
        case RegKind::Scad: {
            if (ay > a * kappa) return y;
            if (ay <= (1.0 + alpha) * kappa) return sgn * soft_threshold(ay, alpha * kappa);
            return sgn * ((a - 1.0) * ay - a * alpha * kappa) / (a - 1.0 - alpha);
        }
        case RegKind::Box: return std::clamp(y, lo, hi);
    }
    return y;
}

void Regularizer::require_prox_step(double alpha) const {
    if (!(alpha > 0.0)) throw ConfigError("prox step alpha must be positive");
    const double r = rho();
    if (alpha * r >= 1.0)
        throw ConfigError("step size violates 0 < alpha < 1/rho (alpha=" + std::to_string(alpha) +
                          ", rho=" + std::to_string(r) + ")");
}

void Regularizer::prox(double alpha, std::span<const double> y, std::span<double> out) const {
    require_prox_step(alpha);
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = prox_scalar(alpha, y[i]);
}

Vec Regularizer::prox(double alpha, std::span<const double> y) const {
    Vec out(y.size());
    prox(alpha, y, out);
    return out;
}

std::optional<double> Regularizer::subgrad_bound_sq(int d) const {
    if (kappa == 0.0) return 0.0;
    switch (kind) {
        case RegKind::Zero: return 0.0;
        case RegKind::L1:
        case RegKind::Mcp:   // max slope kappa, attained at 0+
        case RegKind::Scad:  // max slope kappa on |z| <= kappa
            return kappa * kappa * static_cast<double>(d);
        case RegKind::Box: return std::nullopt;
    }
    return std::nullopt;
}

namespace {

// One-sided derivative of the penalty at x > 0, straight from the value
// formulas; extended oddly to x < 0.
double penalty_slope(const Regularizer& reg, double x) {
    const double ax = std::fabs(x);
    const double sgn = x < 0.0 ? -1.0 : 1.0;
    switch (reg.kind) {
        case RegKind::L1: return sgn * reg.kappa;
        case RegKind::Mcp: return sgn * std::max(reg.kappa - ax / reg.gamma, 0.0);
        case RegKind::Scad:
            if (ax <= reg.kappa) return sgn * reg.kappa;
            if (ax <= reg.a * reg.kappa)
                return sgn * (reg.a * reg.kappa - ax) / (reg.a - 1.0);
            return 0.0;
        default: return 0.0;
    }
}

}  // namespace

double prox_oracle_scalar(const Regularizer& reg, double alpha, double y) {
    reg.require_prox_step(alpha);
    if (reg.kappa == 0.0 || reg.kind == RegKind::Zero) return y;

    const auto objective = [&](double x) {
        const double d = x - y;
        return reg.value_scalar(x) + d * d / (2.0 * alpha);
    };

    double lo, hi;
    if (reg.kind == RegKind::Box) {
        lo = reg.lo;
        hi = reg.hi;
    } else {
        const double span =
            std::fabs(y) + std::max({reg.gamma * reg.kappa, reg.a * reg.kappa, alpha * reg.kappa}) + 1.0;
        lo = -span;
        hi = span;
    }

    // Coarse grid; ties go to the smaller magnitude.
    const int n = 4000;
    const double step = (hi - lo) / n;
    double best_x = lo, best_f = objective(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + step * i;
        const double f = objective(x);
        if (f < best_f - 1e-15 || (std::fabs(f - best_f) <= 1e-15 && std::fabs(x) < std::fabs(best_x))) {
            best_f = f;
            best_x = x;
        }
    }

    // Golden-section refinement around the grid minimizer; the subproblem is
    // strongly convex for alpha*rho < 1, hence unimodal on the bracket.
    double a = std::max(lo, best_x - step);
    double b = std::min(hi, best_x + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > 1e-11) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = objective(d);
        }
    }
    double x = 0.5 * (a + b);
    // Prefer the smaller-magnitude candidate when the objective cannot tell them apart.
    if (objective(0.0) <= objective(x) + 1e-15 && std::fabs(x) <= 2e-11) x = 0.0;
    if (reg.kind == RegKind::Box) return x;

    // Function comparisons flatten out near sqrt(eps/curvature); polish with a
    // sign bisection of the subproblem derivative, which stays exact much
    // further. The derivative jumps by 2*kappa at 0, so 0 is handled first.
    const auto deriv = [&](double t) { return penalty_slope(reg, t) + (t - y) / alpha; };
    if (-reg.kappa + (0.0 - y) / alpha <= 0.0 && reg.kappa + (0.0 - y) / alpha >= 0.0)
        return 0.0;
    double blo, bhi;
    if (reg.kappa + (0.0 - y) / alpha < 0.0) {  // minimizer is positive
        blo = 0.0;
        bhi = hi;
    } else {
        blo = lo;
        bhi = 0.0;
    }
    for (int it = 0; it < 200 && bhi - blo > 1e-12 * std::max(1.0, std::fabs(blo)); ++it) {
        const double mid = 0.5 * (blo + bhi);
        if (deriv(mid) < 0.0)
            blo = mid;
        else
            bhi = mid;
    }
    return 0.5 * (blo + bhi);
}

}  // namespace fedcanon
