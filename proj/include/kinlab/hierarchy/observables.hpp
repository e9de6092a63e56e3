#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kinlab/core/rng.hpp"
#include "kinlab/core/types.hpp"
#include "kinlab/hierarchy/pseudo.hpp"
#include "kinlab/hierarchy/tree.hpp"

namespace kinlab {

template <int D>
using OneParticleDensity = std::function<double(const PhasePoint<D>&)>;

// Evaluator of the initial marginal family f0^{(m)} on configurations of any
// size; the functional is linear in it.
template <int D>
using InitialFamily = std::function<double(const PhaseConfiguration<D>&)>;

// Tensorized family f0^{(m)} = prod f0(z_i) built from a one-particle density.
template <int D>
InitialFamily<D> tensorized(OneParticleDensity<D> f0) {
    return [f0 = std::move(f0)](const PhaseConfiguration<D>& Z) {
        double p = 1.0;
        for (const auto& z : Z) p *= f0(z);
        return p;
    };
}

template <int D>
using VelocityObservable = std::function<double(const std::vector<Vec<D>>&)>;

struct Estimate {
    double value = 0;
    double sigma = 0;
    std::size_t n_samples = 0;
    std::size_t n_nonzero = 0;
    double ci(double z = 3.0) const { return z * sigma; }
};

enum class HierarchyMode { boltzmann, bbgky };

template <int D>
struct ElementarySpec {
    int s = 1;
    int k = 0;
    double t = 0.5;
    std::vector<int> signs;    // fixed J, size k (ignored when marginalize_jm)
    std::vector<int> parents;  // fixed M, size k
    bool marginalize_jm = false;
    bool delta_separated = true;
    bool eta_cutoff = false;          // reject grazing adjunctions (potential sampling)
    HierarchyMode mode = HierarchyMode::boltzmann;
    double eps = 0;                   // BBGKY diameter (> 0 in bbgky mode)
    bool apply_bbgky_prefactor = true;
    // variance reduction: when > 0, velocities are drawn from N(0, theta I)
    // instead of uniformly on B_R, with exact importance reweighting (the
    // B_R indicator stays part of the integrand, so the estimate is unchanged
    // in expectation)
    double gauss_proposal_theta = 0;
};

// MC estimate of the elementary functional I^0_{s,k}(t,J,M)(X_s) (Boltzmann)
// or J^{R,delta}_{s,k}(t,J,M)(X_s) (BBGKY, recollision-excluded): velocities
// V_s are drawn uniformly on the joint ball |V_s| <= R, tree times on the
// delta-separated simplex, angles and adjoined velocities uniformly, and the
// integrand is  phi(V_s) * prod (nu.(v - v_parent))_j * 1_{E <= R^2}
// * f0^{(s+k)}(Z(0)) with the sampling measure factored back in.
template <int D>
Estimate elementary_observable(const std::vector<Vec<D>>& X_s, const VelocityObservable<D>& phi_obs,
                               const ElementarySpec<D>& spec, const InitialFamily<D>& f0,
                               const TruncationParams& params, const PotentialSpec& phi,
                               InteractionKind kind, std::size_t n_mc, Rng& rng) {
    const int s = spec.s, k = spec.k;
    if (static_cast<int>(X_s.size()) != s)
        throw std::invalid_argument("elementary_observable: X_s size != s");
    if (!spec.marginalize_jm &&
        (static_cast<int>(spec.signs.size()) != k || static_cast<int>(spec.parents.size()) != k))
        throw std::invalid_argument("elementary_observable: J, M must have size k");
    if (spec.mode == HierarchyMode::bbgky && !(spec.eps > 0))
        throw std::invalid_argument("elementary_observable: bbgky mode needs eps > 0");

    // volume of the joint ball B_R^s in R^{D s}
    const int ds = D * s;
    double joint_ball_vol = std::pow(PI, 0.5 * ds) / std::tgamma(0.5 * ds + 1.0);
    joint_ball_vol *= std::pow(params.R, ds);

    double prefactor = 1.0;
    if (spec.mode == HierarchyMode::bbgky && spec.apply_bbgky_prefactor) {
        // (N-s)!/(N-s-k)! eps^{k(d-1)} with N from the Boltzmann-Grad scaling
        const double N = std::round(std::pow(spec.eps, -(D - 1)));
        for (int i = 0; i < k; ++i) prefactor *= (N - s - i) * std::pow(spec.eps, D - 1);
    }

    const double th_p = spec.gauss_proposal_theta;
    const double gauss_norm = th_p > 0 ? std::pow(2.0 * PI * th_p, 0.5 * D) : 0.0;
    auto gauss_draw = [&](Rng& r, double& inv_density) {
        Vec<D> v;
        for (int kk = 0; kk < D; ++kk) v[kk] = std::sqrt(th_p) * r.normal();
        inv_density = gauss_norm * std::exp(norm2(v) / (2.0 * th_p));
        return v;
    };

    std::vector<Vec<D>> V(s);
    double sum = 0, sum2 = 0;
    std::size_t nonzero = 0;
    for (std::size_t it = 0; it < n_mc; ++it) {
        double proposal_weight = joint_ball_vol;
        bool support_ok = true;
        if (th_p > 0) {
            proposal_weight = 1.0;
            double v2 = 0;
            for (int i = 0; i < s; ++i) {
                double invq;
                V[i] = gauss_draw(rng, invq);
                proposal_weight *= invq;
                v2 += norm2(V[i]);
            }
            support_ok = v2 <= params.R * params.R;  // B_R indicator of the target
        } else {
            rng.in_ball_joint<D>(params.R, s, V.data());
        }
        PhaseConfiguration<D> Zs(s);
        for (int i = 0; i < s; ++i) Zs[i] = {X_s[i], V[i]};

        CollisionTree<D> tree =
            spec.marginalize_jm
                ? sample_tree<D>(s, k, spec.t, params, rng, spec.delta_separated)
                : sample_tree_fixed_jm<D>(s, k, spec.t, params, spec.signs, spec.parents, rng,
                                          spec.delta_separated);
        if (th_p > 0) {
            // redraw the adjoined velocities from the Gaussian proposal and
            // swap the uniform-ball measure factor for the importance weight
            const double ball = unit_ball_volume(D) * std::pow(params.R, D);
            for (int i = 0; i < k; ++i) {
                double invq;
                tree.vs[i] = gauss_draw(rng, invq);
                if (norm(tree.vs[i]) > params.R) support_ok = false;
                tree.angle_vel_volume *= invq / ball;
            }
        }
        // fixed (J, M): the elementary functional itself is unsigned (the
        // sign product belongs to the series sum). Marginalized mode samples
        // signs uniformly and carries both the 2^k reweight and the signs.
        double sign_product = 1.0;
        if (spec.marginalize_jm) {
            for (int i = 0; i < k; ++i) {
                tree.signs[i] = rng.uniform() < 0.5 ? 1 : -1;
                sign_product *= 2.0 * tree.signs[i];
            }
        }

        double contrib = 0;
        if (support_ok) {
            const PseudoOutput<D> tr =
                spec.mode == HierarchyMode::boltzmann
                    ? boltzmann_pseudo_trajectory<D>(Zs, tree, phi, kind, params, spec.eta_cutoff)
                    : bbgky_pseudo_trajectory<D>(Zs, tree, spec.eps, phi, kind, params,
                                                 spec.eta_cutoff);

            const bool excluded = (spec.mode == HierarchyMode::bbgky) &&
                                  (tr.info.recollision || tr.info.blocked_adjunction);
            if (tr.info.weight != 0.0 && tr.info.energy_cut_passed && !excluded &&
                !tr.info.grazing_rejected) {
                const double f_prod = f0(tr.Z0);
                if (f_prod != 0.0) {
                    contrib = phi_obs(V) * sign_product * tr.info.weight * f_prod *
                              tree.sampling_volume() * proposal_weight * prefactor;
                    ++nonzero;
                }
            }
        }
        sum += contrib;
        sum2 += contrib * contrib;
    }

    Estimate e;
    e.n_samples = n_mc;
    e.n_nonzero = nonzero;
    e.value = sum / static_cast<double>(n_mc);
    const double var = std::max(0.0, sum2 / static_cast<double>(n_mc) - e.value * e.value);
    e.sigma = std::sqrt(var / static_cast<double>(n_mc));
    if (nonzero == 0 && k > 0) e.sigma = std::numeric_limits<double>::infinity();
    return e;
}

struct SeriesReport {
    std::vector<Estimate> per_k;       // increment of each order k = 0..n
    std::vector<double> increments;    // |I_k|
    std::vector<double> ratios;        // |I_k| / |I_{k-1}| for k >= 2
    double total = 0;
    double total_sigma = 0;
};

// Sums elementary observables over k <= n and over (J, M): exhaustive
// enumeration for k <= 2, uniform (J, M) sampling with reweighting beyond.
template <int D>
SeriesReport observable_series(const std::vector<Vec<D>>& X_s, const VelocityObservable<D>& phi_obs,
                               double t, const InitialFamily<D>& f0,
                               const TruncationParams& params, const PotentialSpec& phi,
                               InteractionKind kind, std::size_t per_k_budget, Rng& rng,
                               HierarchyMode mode = HierarchyMode::boltzmann, double eps = 0,
                               double gauss_proposal_theta = 0) {
    SeriesReport rep;
    const int s = static_cast<int>(X_s.size());
    for (int k = 0; k <= params.n; ++k) {
        Estimate ek;
        if (k <= 2) {
            // enumerate signs and parents
            std::vector<int> signs(k), parents(k);
            std::vector<Estimate> parts;
            long combos = 1;
            for (int i = 0; i < k; ++i) combos *= 2L * (s + i);
            const std::size_t per_combo = std::max<std::size_t>(per_k_budget / std::max(combos, 1L), 64);
            std::vector<int> part_signs;
            std::function<void(int)> enumerate = [&](int depth) {
                if (depth == k) {
                    ElementarySpec<D> es;
                    es.s = s;
                    es.k = k;
                    es.t = t;
                    es.signs = signs;
                    es.parents = parents;
                    es.mode = mode;
                    es.eps = eps;
                    es.gauss_proposal_theta = gauss_proposal_theta;
                    parts.push_back(elementary_observable<D>(X_s, phi_obs, es, f0, params, phi,
                                                             kind, per_combo, rng));
                    int sp = 1;
                    for (int i = 0; i < k; ++i) sp *= signs[i];
                    part_signs.push_back(sp);
                    return;
                }
                for (int sign : {+1, -1})
                    for (int m = 0; m < s + depth; ++m) {
                        signs[depth] = sign;
                        parents[depth] = m;
                        enumerate(depth + 1);
                    }
            };
            enumerate(0);
            double v = 0, var = 0;
            std::size_t ns = 0, nz = 0;
            for (std::size_t pi = 0; pi < parts.size(); ++pi) {
                // elementary parts are unsigned; the sign product of J scales
                // each term of the sum
                v += part_signs[pi] * parts[pi].value;
                var += parts[pi].sigma * parts[pi].sigma;
                ns += parts[pi].n_samples;
                nz += parts[pi].n_nonzero;
            }
            ek.value = v;
            ek.sigma = std::sqrt(var);
            ek.n_samples = ns;
            ek.n_nonzero = nz;
        } else {
            ElementarySpec<D> es;
            es.s = s;
            es.k = k;
            es.t = t;
            es.marginalize_jm = true;
            es.mode = mode;
            es.eps = eps;
            es.gauss_proposal_theta = gauss_proposal_theta;
            ek = elementary_observable<D>(X_s, phi_obs, es, f0, params, phi, kind, per_k_budget,
                                          rng);
        }
        rep.per_k.push_back(ek);
        rep.increments.push_back(std::abs(ek.value));
        rep.total += ek.value;
        rep.total_sigma = std::hypot(rep.total_sigma, ek.sigma);
    }
    for (std::size_t k = 2; k < rep.increments.size(); ++k) {
        const double prev = rep.increments[k - 1];
        rep.ratios.push_back(prev > 0 ? rep.increments[k] / prev : 0.0);
    }
    return rep;
}

}  // namespace kinlab
