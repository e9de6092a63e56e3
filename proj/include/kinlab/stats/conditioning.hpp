#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kinlab/boltzmann/maxwellian.hpp"
#include "kinlab/core/histogram.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/core/types.hpp"

namespace kinlab {

// Spatial law for rejection sampling: a box [0, L)^d, optionally with torus
// distance and a smooth bump density 1 + A prod cos(2 pi x_k / L) (normalized).
// Compact support keeps rejection sampling terminating; the paper works in
// whole space, so this is a representativeness restriction, not fidelity.
template <int D>
struct SpatialLaw {
    double L = 1.0;
    bool periodic = true;
    double bump_amplitude = 0.0;  // 0: uniform

    double density(const Vec<D>& x) const {
        // normalized: integral over the box equals 1
        double prod = 1.0;
        for (int k = 0; k < D; ++k) prod *= std::cos(2.0 * PI_ * x[k] / L);
        return (1.0 + bump_amplitude * prod) / std::pow(L, D);
    }

    Vec<D> sample(Rng& rng) const {
        while (true) {
            Vec<D> x;
            for (int k = 0; k < D; ++k) x[k] = rng.uniform() * L;
            if (bump_amplitude == 0.0) return x;
            const double acc = density(x) * std::pow(L, D) / (1.0 + std::abs(bump_amplitude));
            if (rng.uniform() < acc) return x;
        }
    }

    double distance(const Vec<D>& a, const Vec<D>& b) const {
        Vec<D> d = a - b;
        if (periodic)
            for (int k = 0; k < D; ++k) d[k] -= L * std::round(d[k] / L);
        return norm(d);
    }

    // exact average of the density over an axis-aligned cell (the cosine bump
    // integrates in closed form); used to compare against histogram cells
    // without discretization bias
    double density_cell_average(const Vec<D>& lo, const Vec<D>& hi) const {
        double prod = 1.0;
        for (int k = 0; k < D; ++k) {
            const double w = hi[k] - lo[k];
            prod *= (std::sin(2.0 * PI_ * hi[k] / L) - std::sin(2.0 * PI_ * lo[k] / L)) *
                    (L / (2.0 * PI_)) / w;
        }
        return (1.0 + bump_amplitude * prod) / std::pow(L, D);
    }

    // sup_x integral f0 dv = sup of the spatial density
    double sup_spatial_density() const { return (1.0 + std::abs(bump_amplitude)) / std::pow(L, D); }

  private:
    static constexpr double PI_ = 3.14159265358979323846;
};

template <int D>
struct ConditionedEnsemble {
    std::vector<PhaseConfiguration<D>> samples;
    double epsilon = 0;
    SpatialLaw<D> law;
    MaxwellianParams<D> velocity_law;
    double acceptance_rate = 0;   // unbiased estimate of Z_N
    double acceptance_sigma = 0;  // binomial standard error
    std::size_t proposals = 0;
};

// Rejection sampling of Z_N ~ Z_N^{-1} 1_{D_N} f0^{x N}: draw N iid points
// from f0 and accept iff all pairwise distances exceed eps. The acceptance
// rate is an unbiased estimator of the partition function Z_N.
template <int D>
ConditionedEnsemble<D> conditioned_sampler(std::size_t N, double eps, const SpatialLaw<D>& law,
                                           const MaxwellianParams<D>& vel, std::size_t n_samples,
                                           Rng& rng, std::size_t proposal_budget = 0) {
    if (proposal_budget == 0) proposal_budget = 2000 * n_samples + 1000;
    ConditionedEnsemble<D> out;
    out.epsilon = eps;
    out.law = law;
    out.velocity_law = vel;

    std::size_t accepted = 0, proposed = 0;
    while (accepted < n_samples && proposed < proposal_budget) {
        ++proposed;
        PhaseConfiguration<D> Z(N);
        for (auto& z : Z) z.x = law.sample(rng);
        bool ok = true;
        for (std::size_t i = 0; ok && i < N; ++i)
            for (std::size_t j = i + 1; j < N; ++j)
                if (law.distance(Z[i].x, Z[j].x) <= eps) {
                    ok = false;
                    break;
                }
        if (!ok) continue;
        for (auto& z : Z) z.v = sample_maxwellian(vel, rng);
        out.samples.push_back(std::move(Z));
        ++accepted;
    }
    out.proposals = proposed;
    const double p = static_cast<double>(accepted) / static_cast<double>(proposed);
    out.acceptance_rate = p;
    out.acceptance_sigma = std::sqrt(std::max(p * (1 - p), 1.0 / proposed) / proposed);
    if (accepted < n_samples || p < 1e-6)
        throw std::runtime_error(
            "conditioned_sampler: acceptance too low; shrink eps or N (acceptance=" +
            std::to_string(p) + ")");
    return out;
}

struct PartitionBoundCheck {
    double ratio = 1;         // Zhat_{N-s} / Zhat_N
    double ratio_sigma = 0;
    double upper = 1;         // (1 - eps kappa_d |f0|)^{-s}
    bool lower_ok = true;     // ratio >= 1 within CI
    bool upper_ok = true;     // ratio <= upper within CI
    bool pass() const { return lower_ok && upper_ok; }
};

// Verifies 1 <= Z_{N-s} / Z_N <= (1 - eps kappa_d |f0|_{Loo L1})^{-s} from two
// MC acceptance estimates, widening by z_ci standard errors.
inline PartitionBoundCheck partition_bound_check(double Zn, double Zn_sigma, double Zn_minus_s,
                                                 double Zns_sigma, std::size_t s, double eps,
                                                 double f0_sup, int d, double z_ci = 3.0) {
    PartitionBoundCheck out;
    out.ratio = Zn_minus_s / Zn;
    out.ratio_sigma = out.ratio * std::sqrt(std::pow(Zn_sigma / Zn, 2) +
                                            std::pow(Zns_sigma / Zn_minus_s, 2));
    const double base = 1.0 - eps * unit_ball_volume(d) * f0_sup;
    if (!(base > 0)) throw std::invalid_argument("partition_bound_check: bound degenerate");
    out.upper = std::pow(base, -static_cast<double>(s));
    out.lower_ok = out.ratio >= 1.0 - z_ci * out.ratio_sigma;
    out.upper_ok = out.ratio <= out.upper + z_ci * out.ratio_sigma;
    return out;
}

struct FactorizationError {
    double sup_deviation = 0;    // max over off-diagonal cells of |marginal - tensor|
    double mean_deviation = 0;
    double noise_floor = 0;      // expected MC magnitude per cell
    std::size_t cells_used = 0;
};

// Compares the empirical spatial s-marginal of a conditioned ensemble with
// the tensorized law on the same cells, off-diagonal cells only (pair cells
// closer than the exclusion window are skipped). Velocities factor exactly
// under conditioning, so the spatial marginal carries the whole defect.
template <int D>
FactorizationError marginal_factorization_error(const ConditionedEnsemble<D>& ens, int s,
                                                std::size_t bins_per_axis) {
    if (s != 1 && s != 2) throw std::invalid_argument("marginal_factorization_error: s in {1,2}");
    if (ens.samples.empty()) throw std::invalid_argument("marginal_factorization_error: empty");
    const double L = ens.law.L;
    const std::size_t nd = static_cast<std::size_t>(s) * D;
    std::vector<Histogram::Axis> axes(nd, {0.0, L, bins_per_axis});
    Histogram h(std::move(axes));

    const std::size_t N = ens.samples.front().size();
    double x[6];
    for (const auto& Z : ens.samples) {
        if (s == 1) {
            for (const auto& z : Z) {
                for (int k = 0; k < D; ++k) x[k] = z.x[k];
                h.add(x);
            }
        } else {
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j) {
                    if (i == j) continue;
                    for (int k = 0; k < D; ++k) {
                        x[k] = Z[i].x[k];
                        x[D + k] = Z[j].x[k];
                    }
                    h.add(x);
                }
        }
    }

    // diagonal exclusion window: cells whose centers are within eps + cell diagonal
    const double cell = L / static_cast<double>(bins_per_axis);
    const double window = ens.epsilon + cell * std::sqrt(static_cast<double>(D));

    FactorizationError out;
    const double n_events = h.total_weight();
    const double half = 0.5 * cell;
    double sum = 0;
    for (std::size_t idx = 0; idx < h.size(); ++idx) {
        Vec<D> c1, c2;
        for (int k = 0; k < D; ++k) c1[k] = h.center(idx, static_cast<std::size_t>(k));
        if (s == 2) {
            for (int k = 0; k < D; ++k) c2[k] = h.center(idx, static_cast<std::size_t>(D + k));
            if (ens.law.distance(c1, c2) < window) continue;  // diagonal cell
        }
        auto cell_avg = [&](const Vec<D>& c) {
            Vec<D> lo = c, hi = c;
            for (int k = 0; k < D; ++k) {
                lo[k] -= half;
                hi[k] += half;
            }
            return ens.law.density_cell_average(lo, hi);
        };
        double tensor = cell_avg(c1);
        if (s == 2) tensor *= cell_avg(c2);
        const double emp = h.density(idx);
        const double dev = std::abs(emp - tensor);
        out.sup_deviation = std::max(out.sup_deviation, dev);
        sum += dev;
        ++out.cells_used;
    }
    out.mean_deviation = out.cells_used ? sum / static_cast<double>(out.cells_used) : 0.0;
    // per-cell multinomial noise scale at the tensor density level
    const double typical_p = 1.0 / static_cast<double>(h.size());
    out.noise_floor = std::sqrt(typical_p / n_events) / h.cell_volume();
    return out;
}

}  // namespace kinlab
