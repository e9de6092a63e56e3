#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinlab/core/potential.hpp"
#include "kinlab/core/types.hpp"
#include "kinlab/core/vec.hpp"
#include "kinlab/scattering/quadrature.hpp"

namespace kinlab {

inline constexpr double PI = 3.14159265358979323846;

// Reduced two-body inputs: E0 = |dw0|^2 (twice the energy) and the impact
// parameter J0 = |dy0 ^ dw0| / |dw0| in [0,1].
struct ReducedInputs {
    double E0 = 1.0;
    double J0 = 0.0;
};

struct ScatteringSolution {
    double rho_star = 1.0;   // minimal radius
    double tau_star = 0.0;   // microscopic interaction time
    double theta = 0.0;      // half-deflection from the radial integral
    double Theta = 0.0;      // arcsin(J0) + theta, in [0, pi/2]
    double quad_error = 0.0; // accumulated quadrature error estimate
};

// Effective radial energy: Psi = E0 J0^2 / rho^2 + 4 phi(rho).
inline double psi(double rho, const ReducedInputs& in, const PotentialSpec& phi) {
    if (!(rho > 0)) throw std::invalid_argument("psi: rho > 0 required");
    const double barrier = (rho < 1.0) ? 4.0 * phi.phi(rho) : 0.0;
    return in.E0 * in.J0 * in.J0 / (rho * rho) + barrier;
}

// Largest rho in (0,1] with Psi(rho) = E0. Psi is strictly decreasing in rho
// (angular momentum term and repulsive barrier both decrease), so the root is
// unique and bisection applies. For J0 = 1 the root is rho = 1 exactly.
inline double rho_star(const ReducedInputs& in, const PotentialSpec& phi,
                       double tol = 1e-14) {
    if (!(in.E0 > 0)) throw std::invalid_argument("rho_star: E0 > 0 required");
    if (in.J0 >= 1.0) return 1.0;
    double hi = 1.0;  // Psi(1) = E0 J0^2 < E0
    double lo = 0.5;
    while (psi(lo, in, phi) <= in.E0) {
        lo *= 0.5;
        if (lo < 1e-13) {
            throw std::runtime_error(
                "rho_star: Psi - E0 has no sign change on (0,1); potential bounded at "
                "zero cannot stop a head-on encounter at this energy");
        }
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (psi(mid, in, phi) > in.E0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// Integrates g(rho) / sqrt(E0 - Psi(rho)) over (rho*, 1) with the square-root
// endpoint singularity at rho* removed by rho = rho* + (1-rho*) u^2.
// Psi(rho*) is used in place of E0 inside the radicand so the bisection error
// on rho* cannot make the argument negative.
template <typename G>
QuadResult radial_integral(const G& g, double rstar, const ReducedInputs& in,
                           const PotentialSpec& phi, double abs_tol) {
    if (rstar >= 1.0) return {0.0, 0.0, true};
    const double span = 1.0 - rstar;
    const double psi_star = psi(rstar, in, phi);
    auto f = [&](double u) {
        const double rho = rstar + span * u * u;
        const double rad = psi_star - psi(std::min(rho, 1.0), in, phi);
        if (rad <= 0.0) return 0.0;  // only possible within rounding of u = 0
        return g(rho) * 2.0 * span * u / std::sqrt(rad);
    };
    return integrate_adaptive(f, 0.0, 1.0, abs_tol);
}

}  // namespace detail

// tau* = 2 * integral_{rho*}^{1} (E0 - Psi)^{-1/2} drho. Also enforces the
// potential-independent bound tau* <= 2 sqrt(1-J0^2) / (J0^2 sqrt(E0)).
inline double tau_star(const ReducedInputs& in, const PotentialSpec& phi,
                       double abs_tol = 1e-12, double* quad_error = nullptr) {
    const double rstar = rho_star(in, phi);
    auto one = [](double) { return 1.0; };
    const QuadResult q = detail::radial_integral(one, rstar, in, phi, abs_tol);
    if (!q.converged)
        throw std::runtime_error("tau_star: quadrature did not reach tolerance, error=" +
                                 std::to_string(q.error));
    const double tau = 2.0 * q.value;
    if (quad_error) *quad_error = 2.0 * q.error;
    if (in.J0 > 0.0 && in.J0 < 1.0) {
        const double bound =
            2.0 * std::sqrt(1.0 - in.J0 * in.J0) / (in.J0 * in.J0 * std::sqrt(in.E0));
        if (tau > bound * (1.0 + 1e-9))
            throw std::logic_error("tau_star exceeds its analytic bound");
    }
    return tau;
}

// Full reduced-scattering solve: rho*, tau*, half-deflection theta and
// Theta = arcsin(J0) + theta.
inline ScatteringSolution deflection(const ReducedInputs& in, const PotentialSpec& phi,
                                     double abs_tol = 1e-12) {
    if (!(in.E0 > 0)) throw std::invalid_argument("deflection: E0 > 0 required");
    if (in.J0 < 0.0 || in.J0 > 1.0)
        throw std::invalid_argument("deflection: J0 in [0,1] required");
    ScatteringSolution s;
    s.rho_star = rho_star(in, phi);
    double tau_err = 0;
    s.tau_star = tau_star(in, phi, abs_tol, &tau_err);
    s.quad_error = tau_err;
    if (in.J0 == 0.0) {
        s.theta = 0.0;
        s.Theta = 0.0;
        return s;
    }
    if (in.J0 >= 1.0) {
        s.theta = 0.0;
        s.Theta = 0.5 * PI;
        return s;
    }
    const double pref = std::sqrt(in.E0) * in.J0;
    auto g = [&](double rho) { return pref / (rho * rho); };
    const QuadResult q = detail::radial_integral(g, s.rho_star, in, phi, abs_tol);
    if (!q.converged)
        throw std::runtime_error("deflection: quadrature did not reach tolerance");
    s.theta = q.value;
    s.quad_error += q.error;
    s.Theta = std::clamp(std::asin(in.J0) + s.theta, 0.0, 0.5 * PI);
    return s;
}

// ---------------------------------------------------------------------------
// Direct integration of the reduced flow  d(dy)/dtau = dw, d(dw)/dtau = -2 grad phi.
// Independent oracle for the quadrature path: never shares code with it.
// ---------------------------------------------------------------------------

template <int D>
struct ReducedTrajectory {
    Vec<D> dy_exit;
    Vec<D> dw_exit;
    double tau_exit = 0;     // elapsed microscopic time until |dy| = 1 outgoing
    double rho_min = 1.0;    // turning radius
    double energy_drift = 0; // relative drift of |dw|^2/2 + 2 phi(|dy|)
    long steps = 0;
};

namespace detail {

template <int D>
inline Vec<D> reduced_force(const Vec<D>& dy, const PotentialSpec& phi) {
    const double r = norm(dy);
    if (r >= 1.0 || r == 0.0) return Vec<D>::zero();
    return dy * (-2.0 * phi.dphi(r) / r);
}

template <int D>
struct OdeState {
    Vec<D> y, w;
};

template <int D>
inline OdeState<D> rk4_step(const OdeState<D>& s, double h, const PotentialSpec& phi) {
    auto acc = [&phi](const Vec<D>& y) { return reduced_force<D>(y, phi); };
    const Vec<D> k1y = s.w, k1w = acc(s.y);
    const Vec<D> k2y = s.w + 0.5 * h * k1w, k2w = acc(s.y + 0.5 * h * k1y);
    const Vec<D> k3y = s.w + 0.5 * h * k2w, k3w = acc(s.y + 0.5 * h * k2y);
    const Vec<D> k4y = s.w + h * k3w, k4w = acc(s.y + h * k3y);
    return {s.y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
            s.w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)};
}

}  // namespace detail

// Integrates the reduced two-body problem from a pre-collisional state on the
// unit sphere until the separation returns to 1 with outgoing radial velocity.
// Step-doubling RK4 with local extrapolation; `dt` caps the step size.
template <int D>
ReducedTrajectory<D> integrate_reduced_ode(const Vec<D>& dy0, const Vec<D>& dw0,
                                           const PotentialSpec& phi, double dt,
                                           double rel_tol = 1e-12,
                                           long max_steps = 50'000'000) {
    if (std::abs(norm(dy0) - 1.0) > 1e-9)
        throw std::invalid_argument("integrate_reduced_ode: |dy0| = 1 required");
    if (!(dot(dy0, dw0) < 0))
        throw std::invalid_argument("integrate_reduced_ode: pre-collisional datum required");

    using detail::OdeState;
    using detail::rk4_step;
    const double e0 = 0.5 * norm2(dw0) + 2.0 * phi.eval(norm(dy0));
    OdeState<D> s{dy0, dw0};
    double tau = 0, h = dt;
    ReducedTrajectory<D> out;
    out.rho_min = 1.0;

    auto radial_out = [](const OdeState<D>& q) { return dot(q.y, q.w) > 0.0; };

    long steps = 0;
    while (true) {
        if (++steps > max_steps)
            throw std::runtime_error("integrate_reduced_ode: step cap exceeded");
        // step doubling: error estimate from full vs two halves
        OdeState<D> full = rk4_step(s, h, phi);
        OdeState<D> half = rk4_step(rk4_step(s, 0.5 * h, phi), 0.5 * h, phi);
        const double err =
            std::sqrt(norm2(full.y - half.y) + norm2(full.w - half.w)) /
            (1.0 + std::sqrt(norm2(half.y) + norm2(half.w)));
        if (err > 15.0 * rel_tol && h > 1e-15) {
            h = std::max(1e-15, 0.5 * h);
            continue;
        }
        OdeState<D> next{half.y + (1.0 / 15.0) * (half.y - full.y),
                         half.w + (1.0 / 15.0) * (half.w - full.w)};

        const double r_next = norm(next.y);
        if (r_next >= 1.0 && radial_out(next)) {
            // bracket the exit |dy| = 1 inside (tau, tau+h] and bisect
            double lo = 0.0, hi = h;
            for (int it = 0; it < 90 && hi - lo > 1e-16 * (1.0 + tau); ++it) {
                const double mid = 0.5 * (lo + hi);
                OdeState<D> probe = rk4_step(rk4_step(s, 0.5 * mid, phi), 0.5 * mid, phi);
                (norm(probe.y) < 1.0 ? lo : hi) = mid;
            }
            const double texit = 0.5 * (lo + hi);
            OdeState<D> exit_state = rk4_step(rk4_step(s, 0.5 * texit, phi), 0.5 * texit, phi);
            out.dy_exit = exit_state.y;
            out.dw_exit = exit_state.w;
            out.tau_exit = tau + texit;
            out.steps = steps;
            const double e1 = 0.5 * norm2(exit_state.w) + 2.0 * phi.eval(norm(exit_state.y));
            out.energy_drift = std::abs(e1 - e0) / std::max(1.0, std::abs(e0));
            return out;
        }

        // passing through the turning point: refine the radius minimum
        if (dot(s.y, s.w) < 0.0 && radial_out(next)) {
            double lo = 0.0, hi = h;
            for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                OdeState<D> probe = rk4_step(rk4_step(s, 0.5 * mid, phi), 0.5 * mid, phi);
                (dot(probe.y, probe.w) < 0.0 ? lo : hi) = mid;
            }
            OdeState<D> turn = rk4_step(rk4_step(s, 0.25 * (lo + hi), phi), 0.25 * (lo + hi), phi);
            out.rho_min = std::min(out.rho_min, norm(turn.y));
        }
        out.rho_min = std::min(out.rho_min, r_next);

        s = next;
        tau += h;
        if (err < rel_tol && h < dt) h = std::min(dt, 2.0 * h);
    }
}

// Deflection angle extracted from an ODE exit state: the angle between the
// in/outgoing relative velocities is pi - 2 Theta.
template <int D>
double theta_from_ode(const Vec<D>& dw_in, const Vec<D>& dw_out) {
    const double c = std::clamp(dot(dw_in, dw_out) / (norm(dw_in) * norm(dw_out)), -1.0, 1.0);
    return 0.5 * (PI - std::acos(c));
}

// ---------------------------------------------------------------------------
// Deflection inverse and cross-section
// ---------------------------------------------------------------------------

struct NonMonotoneDeflection : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Theta(E0, .) evaluated through the appropriate path.
inline double theta_of_j0(double E0, double J0, const PotentialSpec& phi,
                          InteractionKind kind) {
    if (kind == InteractionKind::hard_sphere) return std::asin(std::clamp(J0, 0.0, 1.0));
    return deflection(ReducedInputs{E0, J0}, phi).Theta;
}

// Monotone bisection of J0 -> Theta(E0, J0), tolerance 1e-10 in J0.
// A coarse scan guards against potentials violating the cross-section
// condition (Lemma-level monotonicity fails there and inversion is ill-posed).
inline double invert_deflection(double E0, double Theta, const PotentialSpec& phi,
                                InteractionKind kind = InteractionKind::potential,
                                double tol = 1e-10, bool scan_monotone = true) {
    if (Theta < 0.0 || Theta > 0.5 * PI + 1e-12)
        throw std::invalid_argument("invert_deflection: Theta in [0, pi/2] required");
    if (kind == InteractionKind::hard_sphere) return std::sin(Theta);
    if (Theta == 0.0) return 0.0;
    // boundary value Theta(E0, 1) = pi/2; the map is double-exponentially flat
    // there for compactly supported potentials, so the level is matched exactly
    if (Theta >= 0.5 * PI * (1.0 - 1e-12)) return 1.0;

    if (scan_monotone) {
        // denser near 0: bounded potentials fold there first (rainbow dip)
        static constexpr double scan[] = {0.02, 0.05, 0.09, 0.15, 0.25,
                                          0.4,  0.55, 0.7,  0.85, 0.97};
        double prev = -1.0;
        for (const double j : scan) {
            const double th = theta_of_j0(E0, j, phi, kind);
            if (th < prev - 1e-9)
                throw NonMonotoneDeflection(
                    "invert_deflection: Theta(E0, .) not monotone for potential '" + phi.label +
                    "' at E0=" + std::to_string(E0) +
                    "; the cross-section condition rho*phi''+2phi' >= 0 fails");
            prev = th;
        }
    }

    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (theta_of_j0(E0, mid, phi, kind) < Theta ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct CrossSectionValue {
    double b = 0;
    bool uncertain = false;  // set near Theta -> pi/2 where dJ0/dTheta may diverge
};

// b(w, Theta) = |w| J0^{d-2} dJ0/dTheta (sin Theta)^{2-d}, with dJ0/dTheta by
// Richardson-extrapolated central differences of the monotone inverse.
inline CrossSectionValue cross_section(double w, double Theta, const PotentialSpec& phi, int d,
                                       InteractionKind kind = InteractionKind::potential,
                                       double fd_step = 1e-5) {
    if (d != 2 && d != 3) throw std::invalid_argument("cross_section: d must be 2 or 3");
    if (!(Theta > 0.0) || Theta >= 0.5 * PI)
        throw std::invalid_argument("cross_section: Theta in (0, pi/2) required");
    CrossSectionValue out;
    if (w == 0.0) return out;
    const double E0 = w * w;

    const double h = std::min(fd_step, 0.25 * std::min(Theta, 0.5 * PI - Theta));
    if (0.5 * PI - Theta < 4.0 * fd_step) out.uncertain = true;

    auto j0 = [&](double th) { return invert_deflection(E0, th, phi, kind, 1e-12, false); };
    auto central = [&](double step) { return (j0(Theta + step) - j0(Theta - step)) / (2.0 * step); };
    const double d1 = central(h);
    const double d2 = central(0.5 * h);
    double dj = (4.0 * d2 - d1) / 3.0;
    if (std::abs(d2 - d1) > 0.02 * std::max(1.0, std::abs(dj))) out.uncertain = true;
    dj = std::max(dj, 0.0);

    const double J0 = j0(Theta);
    const double shape = (d == 2) ? dj : J0 * dj / std::sin(Theta);
    out.b = w * shape;
    return out;
}

// ---------------------------------------------------------------------------
// Scattering operators sigma_eps and sigma_0
// ---------------------------------------------------------------------------

template <int D>
struct ScatterOut {
    PhasePoint<D> z1, z2;
    double t_eps = 0;  // macroscopic interaction time eps * tau*
};

namespace detail {

// Apse direction for a pre-collisional reduced pair (dy0 on the unit sphere).
template <int D>
Vec<D> apse_direction(const Vec<D>& dy0, const Vec<D>& dw0, double theta) {
    if (theta == 0.0) return dy0;
    Vec<D> perp = reject(dw0, dy0);
    const double pn = norm(perp);
    if (pn < 1e-300) return dy0;  // head-on
    return std::cos(theta) * dy0 + (std::sin(theta) / pn) * perp;
}

}  // namespace detail

// Macroscopic scattering operator (Definition of sigma_eps): maps a
// pre-collisional pair at distance eps to the post-collisional pair, with the
// center of mass advanced by the interaction time t_eps = eps tau*.
template <int D>
ScatterOut<D> scattering_operator_sigma_eps(const PhasePoint<D>& z1, const PhasePoint<D>& z2,
                                            const PotentialSpec& phi, double eps,
                                            InteractionKind kind = InteractionKind::potential) {
    Vec<D> dx = z1.x - z2.x;
    const double r = norm(dx);
    if (std::abs(r - eps) > 1e-9 * eps)
        throw std::invalid_argument("sigma_eps: |x1 - x2| = eps required");
    Vec<D> dy0 = dx / r;
    Vec<D> dw0 = z1.v - z2.v;
    if (!(dot(dy0, dw0) < 0)) throw std::invalid_argument("sigma_eps: pre-collisional pair required");

    if (kind == InteractionKind::hard_sphere) {
        const double wn = dot(dy0, dw0);
        ScatterOut<D> out;
        out.z1 = {z1.x, z1.v - wn * dy0};
        out.z2 = {z2.x, z2.v + wn * dy0};
        out.t_eps = 0;
        return out;
    }

    const double E0 = norm2(dw0);
    const double J0 = wedge_norm(dy0, dw0) / std::sqrt(E0);
    if (J0 > 1.0 - 1e-10) throw std::invalid_argument("sigma_eps: grazing encounter rejected");
    const ScatteringSolution sol = deflection(ReducedInputs{E0, J0}, phi);
    const Vec<D> omega = detail::apse_direction(dy0, dw0, sol.theta);

    const Vec<D> dy_out = -dy0 + 2.0 * dot(omega, dy0) * omega;
    const Vec<D> dw_out = dw0 - 2.0 * dot(omega, dw0) * omega;
    const Vec<D> xm = 0.5 * (z1.x + z2.x);
    const Vec<D> vm = 0.5 * (z1.v + z2.v);
    const double t_eps = eps * sol.tau_star;

    ScatterOut<D> out;
    out.z1 = {xm + t_eps * vm + (0.5 * eps) * dy_out, vm + 0.5 * dw_out};
    out.z2 = {xm + t_eps * vm - (0.5 * eps) * dy_out, vm - 0.5 * dw_out};
    out.t_eps = t_eps;
    return out;
}

template <int D>
struct Sigma0Out {
    Vec<D> nu;
    Vec<D> v1, v2;
};

// eps-free scattering map sigma_0(nu, v1, v2) = (nu', v1', v2').
// Input must be pre-collisional: nu . (v1 - v2) < 0.
template <int D>
Sigma0Out<D> sigma0(const Vec<D>& nu, const Vec<D>& v1, const Vec<D>& v2,
                    const PotentialSpec& phi, InteractionKind kind = InteractionKind::potential) {
    Vec<D> dw0 = v1 - v2;
    const double rad = dot(nu, dw0);
    if (!(rad < 0)) throw std::invalid_argument("sigma0: pre-collisional input required");

    if (kind == InteractionKind::hard_sphere) {
        // instantaneous reflection; the contact direction is unchanged
        return {nu, v1 - rad * nu, v2 + rad * nu};
    }
    const double E0 = norm2(dw0);
    if (E0 == 0.0) throw std::invalid_argument("sigma0: zero relative velocity");
    const double J0 = wedge_norm(nu, dw0) / std::sqrt(E0);
    if (J0 > 1.0 - 1e-10) throw std::invalid_argument("sigma0: grazing encounter rejected");
    const ScatteringSolution sol = deflection(ReducedInputs{E0, J0}, phi);
    const Vec<D> omega = detail::apse_direction(nu, dw0, sol.theta);
    const Vec<D> dw_out = dw0 - 2.0 * dot(omega, dw0) * omega;
    const Vec<D> nu_out = -nu + 2.0 * dot(omega, nu) * omega;
    const Vec<D> vm = 0.5 * (v1 + v2);
    return {nu_out, vm + 0.5 * dw_out, vm - 0.5 * dw_out};
}

// Inverse map: velocity reversal conjugation of sigma_0. Input must be
// post-collisional: nu . (v1 - v2) > 0.
template <int D>
Sigma0Out<D> sigma0_inverse(const Vec<D>& nu, const Vec<D>& v1, const Vec<D>& v2,
                            const PotentialSpec& phi,
                            InteractionKind kind = InteractionKind::potential) {
    if (!(dot(nu, v1 - v2) > 0))
        throw std::invalid_argument("sigma0_inverse: post-collisional input required");
    Sigma0Out<D> s = sigma0<D>(nu, -v1, -v2, phi, kind);
    return {s.nu, -s.v1, -s.v2};
}

// Inverse of sigma_eps by the same conjugation; the returned pair is the
// pre-collisional state t_eps earlier.
template <int D>
ScatterOut<D> sigma_eps_inverse(const PhasePoint<D>& z1, const PhasePoint<D>& z2,
                                const PotentialSpec& phi, double eps,
                                InteractionKind kind = InteractionKind::potential) {
    PhasePoint<D> r1{z1.x, -z1.v}, r2{z2.x, -z2.v};
    ScatterOut<D> s = scattering_operator_sigma_eps<D>(r1, r2, phi, eps, kind);
    s.z1.v = -s.z1.v;
    s.z2.v = -s.z2.v;
    return s;
}

// ---------------------------------------------------------------------------
// Tabulated cross-section
// ---------------------------------------------------------------------------

struct CrossSectionTable {
    std::vector<double> E0_grid;     // sorted, > 0
    std::vector<double> Theta_grid;  // sorted, inside (0, pi/2)
    std::vector<double> b_values;    // row-major [E0][Theta]: shape factor (b / |w|)
    std::vector<double> J0_of_Theta; // same layout
    int d = 2;

    double shape_at(std::size_t ie, std::size_t it) const {
        return b_values[ie * Theta_grid.size() + it];
    }

    // Bilinear interpolation of the shape factor in (log E0, Theta), clamped
    // to the grid. b(w, Theta) = |w| * shape(E0 = w^2, Theta).
    double b(double w, double Theta) const {
        if (w == 0.0) return 0.0;
        const double E0 = w * w;
        auto clamped_cell = [](const std::vector<double>& g, double x, std::size_t& i0,
                               double& frac) {
            if (x <= g.front()) { i0 = 0; frac = 0; return; }
            if (x >= g.back()) { i0 = g.size() - 2; frac = 1; return; }
            const auto it = std::upper_bound(g.begin(), g.end(), x);
            i0 = static_cast<std::size_t>(it - g.begin()) - 1;
            frac = (x - g[i0]) / (g[i0 + 1] - g[i0]);
        };
        std::size_t ie, it;
        double fe, ft;
        clamped_cell(E0_grid, E0, ie, fe);
        clamped_cell(Theta_grid, Theta, it, ft);
        const double s00 = shape_at(ie, it), s01 = shape_at(ie, it + 1);
        const double s10 = shape_at(ie + 1, it), s11 = shape_at(ie + 1, it + 1);
        const double s = (1 - fe) * ((1 - ft) * s00 + ft * s01) + fe * ((1 - ft) * s10 + ft * s11);
        return w * std::max(s, 0.0);
    }

    double max_shape() const {
        double m = 0;
        for (double v : b_values) m = std::max(m, v);
        return m;
    }
};

// Builds the table through invert_deflection + cross_section. Rows are checked
// for strict monotonicity of J0(Theta), which requires a potential passing the
// cross-section condition.
inline CrossSectionTable build_cross_section_table(const PotentialSpec& phi, int d,
                                                   const std::vector<double>& E0_grid,
                                                   const std::vector<double>& Theta_grid,
                                                   InteractionKind kind = InteractionKind::potential) {
    CrossSectionTable tab;
    tab.E0_grid = E0_grid;
    tab.Theta_grid = Theta_grid;
    tab.d = d;
    tab.b_values.resize(E0_grid.size() * Theta_grid.size());
    tab.J0_of_Theta.resize(tab.b_values.size());
    for (std::size_t ie = 0; ie < E0_grid.size(); ++ie) {
        double prev = -1.0;
        for (std::size_t it = 0; it < Theta_grid.size(); ++it) {
            const double th = Theta_grid[it];
            const double j = invert_deflection(E0_grid[ie], th, phi, kind, 1e-12, it == 0);
            if (j <= prev)
                throw NonMonotoneDeflection("cross-section table: J0(Theta) not increasing");
            prev = j;
            tab.J0_of_Theta[ie * Theta_grid.size() + it] = j;
            const double w = std::sqrt(E0_grid[ie]);
            tab.b_values[ie * Theta_grid.size() + it] =
                cross_section(w, th, phi, d, kind).b / w;
        }
    }
    return tab;
}

}  // namespace kinlab
