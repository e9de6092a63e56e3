#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kinlab/core/potential.hpp"
#include "kinlab/core/types.hpp"
#include "kinlab/core/vec.hpp"
#include "kinlab/hierarchy/tree.hpp"
#include "kinlab/md/hard_sphere.hpp"
#include "kinlab/scattering/scattering.hpp"

namespace kinlab {

// Minimal distance of the relative backward ray  dx - tau dv, tau >= 0
// (closed form point-to-ray distance).
template <int D>
double backward_ray_min_distance(const Vec<D>& dx, const Vec<D>& dv) {
    const double b = dot(dx, dv);
    if (b <= 0) return norm(dx);  // infimum at tau = 0 (receding backwards)
    const double a = norm2(dv);
    if (a == 0) return norm(dx);
    const double tau = b / a;
    return norm(dx - tau * dv);
}

// Same restricted to tau in [tau_lo, tau_hi].
template <int D>
double backward_segment_min_distance(const Vec<D>& dx, const Vec<D>& dv, double tau_lo,
                                     double tau_hi) {
    const double a = norm2(dv);
    double tau = (a == 0) ? tau_lo : dot(dx, dv) / a;
    tau = std::clamp(tau, tau_lo, tau_hi);
    return norm(dx - tau * dv);
}

struct GoodConfigResult {
    bool good = false;
    double min_backward_distance = 0;
};

// Membership in G_k(c): backward free flow keeps all pairs at distance >= c
// for all tau >= 0.
template <int D>
GoodConfigResult good_config_check(const PhaseConfiguration<D>& Z, double c) {
    GoodConfigResult r;
    r.min_backward_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < Z.size(); ++i)
        for (std::size_t j = i + 1; j < Z.size(); ++j)
            r.min_backward_distance =
                std::min(r.min_backward_distance,
                         backward_ray_min_distance(Z[i].x - Z[j].x, Z[i].v - Z[j].v));
    if (Z.size() < 2) r.min_backward_distance = std::numeric_limits<double>::infinity();
    r.good = r.min_backward_distance >= c;
    return r;
}

struct PseudoTrajectoryResult {
    template <int DD>
    using Config = PhaseConfiguration<DD>;

    bool recollision = false;        // un-prescribed pair approach below eps (BBGKY only)
    bool blocked_adjunction = false; // new particle overlapped a third body at adjunction
    bool grazing_rejected = false;   // |nu.(v - v_parent)| < eta with the cutoff active
    bool energy_cut_passed = true;   // E(Z(0)) <= R^2
    double min_pair_distance = std::numeric_limits<double>::infinity();
    double weight = 0;               // product of (nu_i . (v_i - v_parent))_{j_i}
};

template <int D>
struct PseudoOutput {
    PhaseConfiguration<D> Z0;  // configuration at time 0
    PseudoTrajectoryResult info;
};

namespace detail {

inline double signed_part(double x, int sign) { return sign > 0 ? std::max(x, 0.0) : std::max(-x, 0.0); }

}  // namespace detail

// Boltzmann (eps = 0) pseudo-trajectory: backward free flow between the tree
// times; at each t_i the new particle appears at its parent's position. For a
// post-collisional sign the pair velocities are replaced through
// sigma_0^{-1}. Returns the configuration at time 0 and the collision-kernel
// weight factors.
template <int D>
PseudoOutput<D> boltzmann_pseudo_trajectory(const PhaseConfiguration<D>& Zs,
                                            const CollisionTree<D>& tree,
                                            const PotentialSpec& phi, InteractionKind kind,
                                            const TruncationParams& params,
                                            bool eta_cutoff_active = false) {
    PseudoOutput<D> out;
    out.info.weight = 1.0;
    PhaseConfiguration<D> Z = Zs;
    double now = tree.t;

    auto free_flow_back = [&Z](double dt) {
        for (auto& z : Z) z.x -= dt * z.v;
    };

    for (int i = 0; i < tree.k; ++i) {
        free_flow_back(now - tree.times[i]);
        now = tree.times[i];
        const int m = tree.parents[i];
        const Vec<D>& nu = tree.nus[i];
        const Vec<D>& v = tree.vs[i];
        const double rad = dot(nu, v - Z[m].v);

        out.info.weight *= detail::signed_part(rad, tree.signs[i]);
        if (eta_cutoff_active && std::abs(rad) < params.eta) {
            out.info.grazing_rejected = true;
            out.info.weight = 0.0;
        }

        PhasePoint<D> znew{Z[m].x, v};
        if (tree.signs[i] > 0 && rad > 0 && !out.info.grazing_rejected) {
            const Sigma0Out<D> pre = sigma0_inverse<D>(nu, v, Z[m].v, phi, kind);
            znew.v = pre.v1;
            Z[m].v = pre.v2;
        }
        Z.push_back(znew);
        if (out.info.weight == 0.0 && !eta_cutoff_active) {
            // sign mismatch: factor is zero, nothing further contributes
        }
    }
    free_flow_back(now);
    const double R2 = params.R * params.R;
    out.info.energy_cut_passed = free_hamiltonian(Z) <= R2;
    out.Z0 = std::move(Z);
    return out;
}

// BBGKY (eps > 0) pseudo-trajectory: the same construction at diameter eps.
// Adjunction happens at x_parent + eps nu; post-collisional adjunctions go
// through sigma_eps^{-1} including the backward time shift t_eps. Between
// adjunctions every pair is screened for an un-prescribed approach below eps
// along the backward free flow; any such approach sets the recollision flag
// (transport is NOT corrected: the flagged samples are the ones the truncated
// functionals exclude).
template <int D>
PseudoOutput<D> bbgky_pseudo_trajectory(const PhaseConfiguration<D>& Zs,
                                        const CollisionTree<D>& tree, double eps,
                                        const PotentialSpec& phi, InteractionKind kind,
                                        const TruncationParams& params,
                                        bool eta_cutoff_active = false) {
    if (!(eps > 0)) throw std::invalid_argument("bbgky_pseudo_trajectory: eps > 0 required");
    PseudoOutput<D> out;
    out.info.weight = 1.0;
    PhaseConfiguration<D> Z = Zs;
    double now = tree.t;

    // pairs excused from the recollision screen on the next leg: the freshly
    // adjoined contact pair is at distance exactly eps by construction
    long skip_i = -1, skip_j = -1;

    auto screen_leg = [&](double dt) {
        // backward free flow over [now - dt, now]: screen all pairs
        for (std::size_t i = 0; i < Z.size(); ++i)
            for (std::size_t j = i + 1; j < Z.size(); ++j) {
                const double dmin = backward_segment_min_distance(
                    Z[i].x - Z[j].x, Z[i].v - Z[j].v, 0.0, dt);
                if (static_cast<long>(i) == skip_i && static_cast<long>(j) == skip_j) {
                    // contact pair: separation from eps is what matters
                    out.info.min_pair_distance = std::min(out.info.min_pair_distance, dmin);
                    continue;
                }
                out.info.min_pair_distance = std::min(out.info.min_pair_distance, dmin);
                if (dmin < eps) out.info.recollision = true;
            }
        for (auto& z : Z) z.x -= dt * z.v;
    };

    for (int i = 0; i < tree.k; ++i) {
        screen_leg(now - tree.times[i]);
        now = tree.times[i];
        skip_i = skip_j = -1;
        const int m = tree.parents[i];
        const Vec<D>& nu = tree.nus[i];
        const Vec<D>& v = tree.vs[i];
        const double rad = dot(nu, v - Z[m].v);

        out.info.weight *= detail::signed_part(rad, tree.signs[i]);
        if (eta_cutoff_active && std::abs(rad) < params.eta) {
            out.info.grazing_rejected = true;
            out.info.weight = 0.0;
        }

        PhasePoint<D> znew{Z[m].x + eps * nu, v};
        // blocked adjunction: the new particle may not overlap a third body
        for (std::size_t j = 0; j < Z.size(); ++j) {
            if (static_cast<int>(j) == m) continue;
            if (norm(Z[j].x - znew.x) < eps) out.info.blocked_adjunction = true;
        }

        if (tree.signs[i] > 0 && rad > 0 && !out.info.grazing_rejected) {
            if (kind == InteractionKind::hard_sphere) {
                // instantaneous reflection, positions unchanged
                const Sigma0Out<D> pre = sigma0_inverse<D>(nu, v, Z[m].v, phi, kind);
                znew.v = pre.v1;
                Z[m].v = pre.v2;
            } else {
                // time-shifted inverse scattering: both particles move to their
                // pre-collisional state at now - t_eps; the others free-flow
                const ScatterOut<D> pre =
                    sigma_eps_inverse<D>(znew, Z[m], phi, eps, kind);
                for (std::size_t j = 0; j < Z.size(); ++j)
                    if (static_cast<int>(j) != m) Z[j].x -= pre.t_eps * Z[j].v;
                znew = pre.z1;
                Z[m] = pre.z2;
                now -= pre.t_eps;
            }
        }
        Z.push_back(znew);
        skip_i = std::min<long>(m, static_cast<long>(Z.size()) - 1);
        skip_j = std::max<long>(m, static_cast<long>(Z.size()) - 1);
    }
    screen_leg(now);
    const double R2 = params.R * params.R;
    const double energy = (kind == InteractionKind::hard_sphere)
                              ? free_hamiltonian(Z)
                              : epsilon_hamiltonian(Z, phi, eps);
    out.info.energy_cut_passed = energy <= R2;
    out.Z0 = std::move(Z);
    return out;
}

}  // namespace kinlab
