#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace kinlab {

// Radial repulsive potential supported in the unit ball, supplied with
// analytic first and second derivatives. Outside [0,1) the potential is
// treated as exactly zero regardless of the supplied closures.
struct PotentialSpec {
    std::function<double(double)> phi;    // rho in (0,1) -> energy
    std::function<double(double)> dphi;   // phi'
    std::function<double(double)> ddphi;  // phi''
    std::string label;
    bool bounded_at_zero = false;  // true if phi(0+) is finite (accepted with warning)

    double eval(double rho) const { return rho >= 1.0 ? 0.0 : phi(rho); }
    double eval_d(double rho) const { return rho >= 1.0 ? 0.0 : dphi(rho); }
    double eval_dd(double rho) const { return rho >= 1.0 ? 0.0 : ddphi(rho); }

    // Inverse of the (strictly decreasing) potential on (0,1): largest rho
    // with phi(rho) = y. Bisection; y must be positive and attained.
    double inverse(double y) const;
};

// Dispatch tag: the hard-sphere interaction is a limit object with no
// potential evaluation; scattering and hierarchy code branch on it.
enum class InteractionKind { hard_sphere, potential };

namespace potentials {

// exp_barrier: rho^{-2} exp(-1/(1-rho^2)).
// Unbounded at 0, C^inf, supported in the unit ball, vanishing derivatives at 1,
// and satisfies rho*phi'' + 2*phi' >= 0 on (0,1) (equivalent to (rho^2 phi')'
// >= 0; substituting u = rho^2 reduces it to u^4+u^3+2u^2-3u+1 > 0 on [0,1]).
// The exponent -1 variant of the same family fails that condition on
// (0, 3^{-1/4}) and is therefore not used.
inline PotentialSpec exp_barrier() {
    auto E = [](double r) { return std::exp(-1.0 / (1.0 - r * r)); };
    PotentialSpec p;
    p.label = "exp_barrier";
    p.phi = [E](double r) { return E(r) / (r * r); };
    // phi' = -2E (1/r^3 + 1/(r w^2)),  w = 1 - r^2
    p.dphi = [E](double r) {
        const double w = 1.0 - r * r;
        return -2.0 * E(r) * (1.0 / (r * r * r) + 1.0 / (r * w * w));
    };
    // phi'' = 2E [ 3/r^4 + 1/(r^2 w^2) + 2/(w^2 r^2) + 2/w^4 - 4/w^3 ]
    //   from differentiating the expression above; kept in expanded form.
    p.ddphi = [E](double r) {
        const double w = 1.0 - r * r;
        const double r2 = r * r;
        // d/dr[-2E(r^-3 + r^-1 w^-2)] with E' = -2rE/w^2
        const double term1 = (2.0 * r / (w * w)) * 2.0 * (1.0 / (r2 * r) + 1.0 / (r * w * w));
        const double term2 = -2.0 * (-3.0 / (r2 * r2) - 1.0 / (r2 * w * w) + 4.0 / (w * w * w));
        return E(r) * (term1 + term2);
    };
    return p;
}

// quadratic_cap: (1-rho)^2. Monotone and nonnegative but bounded at zero and
// deliberately failing the cross-section condition (rho*phi''+2phi' = 6rho-4
// changes sign at rho = 2/3); used for negative tests.
inline PotentialSpec quadratic_cap() {
    PotentialSpec p;
    p.label = "quadratic_cap";
    p.bounded_at_zero = true;
    p.phi = [](double r) { return (1.0 - r) * (1.0 - r); };
    p.dphi = [](double r) { return -2.0 * (1.0 - r); };
    p.ddphi = [](double) { return 2.0; };
    return p;
}

// The hard-sphere limit object. No phi evaluation is ever valid.
inline PotentialSpec hard_sphere() {
    PotentialSpec p;
    p.label = "hard_sphere";
    auto no = [](double) -> double {
        throw std::logic_error("hard_sphere potential has no pointwise evaluation");
    };
    p.phi = no;
    p.dphi = no;
    p.ddphi = no;
    return p;
}

inline PotentialSpec by_label(const std::string& label) {
    if (label == "hard_sphere") return hard_sphere();
    if (label == "exp_barrier") return exp_barrier();
    if (label == "quadratic_cap") return quadratic_cap();
    throw std::invalid_argument("unknown potential label: " + label);
}

}  // namespace potentials

inline double PotentialSpec::inverse(double y) const {
    if (!(y > 0)) throw std::invalid_argument("PotentialSpec::inverse: y must be > 0");
    double lo = 1e-14, hi = 1.0 - 1e-14;
    if (eval(lo) < y) {
        if (!bounded_at_zero) throw std::runtime_error("PotentialSpec::inverse: y above range");
        return lo;  // bounded potential, level never attained; clamp to the origin
    }
    if (eval(hi) > y) return 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (eval(mid) > y ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Per-property result of a grid validation sweep.
struct PotentialReport {
    struct Check {
        bool pass = true;
        double worst_value = 0;     // most violating value observed
        double worst_location = 0;  // rho where it occurred
    };
    Check nonnegative;
    Check nonincreasing;        // phi' <= 0
    Check compact_support;      // phi -> 0 and phi' finite as rho -> 1-
    Check cross_section_cond;   // rho*phi'' + 2*phi' >= 0  (the monotonicity condition)
    bool unbounded_near_zero = true;  // flagged (not failed) when false

    bool all_pass() const {
        return nonnegative.pass && nonincreasing.pass && compact_support.pass &&
               cross_section_cond.pass;
    }
};

// Evaluates the structural assumptions on a grid of (0,1). Report-only.
inline PotentialReport validate_potential(const PotentialSpec& p, int grid_size) {
    if (grid_size < 2) throw std::invalid_argument("validate_potential: grid_size >= 2 required");
    PotentialReport rep;
    if (p.label == "hard_sphere") return rep;  // limit object: vacuously fine

    auto update = [](PotentialReport::Check& c, double violation, double rho) {
        // violation > 0 means the property failed by that much
        if (violation > c.worst_value || (c.pass && violation > 0)) {
            c.worst_value = std::max(violation, c.worst_value);
            c.worst_location = rho;
        }
        if (violation > 1e-12) c.pass = false;
    };

    for (int i = 0; i < grid_size; ++i) {
        const double rho = (i + 0.5) / grid_size;
        const double v = p.phi(rho), dv = p.dphi(rho), ddv = p.ddphi(rho);
        update(rep.nonnegative, -v, rho);
        update(rep.nonincreasing, dv, rho);
        update(rep.cross_section_cond, -(rho * ddv + 2.0 * dv), rho);
    }
    // support: phi and phi' at the edge of the unit ball
    const double edge = 1.0 - 1e-9;
    update(rep.compact_support, std::abs(p.phi(edge)) - 1e-6, edge);
    if (!std::isfinite(p.dphi(edge))) {
        rep.compact_support.pass = false;
        rep.compact_support.worst_location = edge;
        rep.compact_support.worst_value = std::numeric_limits<double>::infinity();
    }
    rep.unbounded_near_zero = !p.bounded_at_zero && p.phi(1e-7) > 1e6;
    return rep;
}

}  // namespace kinlab
