#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "kinlab/core/histogram.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/core/vec.hpp"
#include "kinlab/scattering/scattering.hpp"

namespace kinlab {

// Monte Carlo representation of the (spatially homogeneous) one-particle
// density: n equally weighted velocities. `weight` is the represented mass
// density per particle, so the density is weight * n.
template <int D>
struct VelocityEnsemble {
    std::vector<Vec<D>> v;
    double weight = 0;
    double t = 0;

    double density() const { return weight * static_cast<double>(v.size()); }

    Vec<D> momentum_density() const {
        Vec<D> p{};
        for (const auto& u : v) p += u;
        return p * weight;
    }
    double energy_density() const {
        double e = 0;
        for (const auto& u : v) e += 0.5 * norm2(u);
        return e * weight;
    }
    // velocity moment <|v - mean|^2>/d
    double temperature() const {
        Vec<D> mean{};
        for (const auto& u : v) mean += u;
        mean *= 1.0 / v.size();
        double s = 0;
        for (const auto& u : v) s += norm2(u - mean);
        return s / (static_cast<double>(v.size()) * D);
    }
    double fourth_moment() const {
        double s = 0;
        for (const auto& u : v) s += norm2(u) * norm2(u);
        return s / static_cast<double>(v.size());
    }

    static VelocityEnsemble uniform_weight(std::vector<Vec<D>> vs, double total_density,
                                           double t0 = 0) {
        VelocityEnsemble e;
        e.weight = total_density / vs.size();
        e.v = std::move(vs);
        e.t = t0;
        return e;
    }
};

// The elastic collision exchange parametrized by the apse direction:
//   v'  = v  + omega.(v1 - v) omega
//   v1' = v1 - omega.(v1 - v) omega
// Conserves v + v1 and |v|^2 + |v1|^2; applying it twice with the same omega
// returns the inputs.
template <int D>
std::pair<Vec<D>, Vec<D>> post_collision_velocities(const Vec<D>& v, const Vec<D>& v1,
                                                    const Vec<D>& omega) {
    if (std::abs(norm(omega) - 1.0) > 1e-12)
        throw std::invalid_argument("post_collision_velocities: |omega| = 1 required");
    const double q = dot(omega, v1 - v);
    return {v + q * omega, v1 - q * omega};
}

// Collision kernel selection for DSMC and the weak-form estimator.
struct HardSphereKernel {};
template <int D>
using DsmcKernel = std::variant<HardSphereKernel, const CrossSectionTable*>;

namespace detail {

// b(w, omega) for omega on the unit sphere. Hard spheres: (omega . w)_+.
// Table kernel: interpolated b(|w|, Theta) on the hemisphere omega.w > 0.
template <int D>
double kernel_b(const DsmcKernel<D>& kernel, const Vec<D>& w, const Vec<D>& omega) {
    const double c = dot(omega, w);
    if (c <= 0) return 0.0;
    if (std::holds_alternative<HardSphereKernel>(kernel)) return c;
    const CrossSectionTable* tab = std::get<const CrossSectionTable*>(kernel);
    const double wn = norm(w);
    if (wn == 0) return 0.0;
    const double Theta = std::acos(std::min(c / wn, 1.0));
    return tab->b(wn, Theta);
}

template <int D>
double kernel_b_majorant(const DsmcKernel<D>& kernel, double w_max) {
    if (std::holds_alternative<HardSphereKernel>(kernel)) return w_max;
    return std::get<const CrossSectionTable*>(kernel)->max_shape() * w_max;
}

}  // namespace detail

struct DsmcStepStats {
    std::uint64_t candidates = 0;
    std::uint64_t collisions = 0;
};

// One no-time-counter DSMC step of size dt. Pair (i,j) with angle omega
// collides at rate density (weight) b(v_i - v_j, omega) d omega, which
// realizes the homogeneous collision operator for the represented density.
// Majorant rejection: candidates are drawn uniformly, accepted with
// probability b / b_maj. A table kernel exceeding its majorant aborts.
template <int D>
DsmcStepStats dsmc_step(VelocityEnsemble<D>& ens, double dt, const DsmcKernel<D>& kernel,
                        Rng& rng) {
    if (!(dt > 0)) throw std::invalid_argument("dsmc_step: dt > 0 required");
    const std::size_t n = ens.v.size();
    DsmcStepStats stats;
    if (n < 2) {
        ens.t += dt;
        return stats;
    }

    double vmax2 = 0;
    for (const auto& u : ens.v) vmax2 = std::max(vmax2, norm2(u));
    const double w_max = 2.0 * std::sqrt(vmax2) * 1.05;
    const double b_maj = detail::kernel_b_majorant<D>(kernel, w_max) * 1.05;
    if (b_maj == 0) {
        ens.t += dt;
        return stats;
    }

    const double sphere = unit_sphere_area(D);
    // total majorant rate: (n-1)/2 * weight * n * b_maj * |S^{d-1}|
    const double lambda =
        0.5 * static_cast<double>(n) * static_cast<double>(n - 1) * ens.weight * b_maj * sphere;
    const double expected = lambda * dt;
    // Poisson candidate count via inversion on the uniform stream
    std::uint64_t m;
    if (expected < 30) {
        m = 0;
        double acc = std::exp(-expected);
        double u = rng.uniform(), cum = acc;
        while (u > cum && m < 1000000) {
            ++m;
            acc *= expected / static_cast<double>(m);
            cum += acc;
        }
    } else {
        const double g = rng.normal();
        m = static_cast<std::uint64_t>(std::max(0.0, std::round(expected + g * std::sqrt(expected))));
    }

    for (std::uint64_t c = 0; c < m; ++c) {
        ++stats.candidates;
        const std::size_t i = rng.below(n);
        std::size_t j = rng.below(n - 1);
        if (j >= i) ++j;
        const Vec<D> omega = rng.unit_vector<D>();
        const Vec<D> w = ens.v[j] - ens.v[i];
        const double b = detail::kernel_b<D>(kernel, w, omega);
        if (b > b_maj)
            throw std::runtime_error("dsmc_step: kernel exceeded its majorant (|w|=" +
                                     std::to_string(norm(w)) + ")");
        if (rng.uniform() * b_maj < b) {
            auto [vi, vj] = post_collision_velocities(ens.v[i], ens.v[j], omega);
            ens.v[i] = vi;
            ens.v[j] = vj;
            ++stats.collisions;
        }
    }
    ens.t += dt;
    return stats;
}

// Runtime guard from the local existence theorem: T = C_beta / bound, where
// bound is the weighted sup norm ||f0 exp(beta |v|^2 / 2)||_inf. The constant
// table is calibrated so that for Maxwellian-type data the window corresponds
// to a few collision times (scaling is what matters; see README).
inline double existence_horizon(double f0_bound, double beta, int d = 2) {
    if (!(f0_bound > 0)) throw std::invalid_argument("existence_horizon: bound > 0 required");
    if (!(beta > 0)) throw std::invalid_argument("existence_horizon: beta > 0 required");
    // C_beta = c_d * beta^{(d+1)/2}; c_d chosen as 6 mean collision times for
    // M_{1,0,1/beta} at unit density (d=2: 0.269, d=3: 0.0538)
    const double c_d = (d == 2) ? 0.269 : 0.0538;
    const double C_beta = c_d * std::pow(beta, 0.5 * (d + 1));
    return C_beta / f0_bound;
}

}  // namespace kinlab
