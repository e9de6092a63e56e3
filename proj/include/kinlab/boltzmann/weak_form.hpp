#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "kinlab/boltzmann/dsmc.hpp"
#include "kinlab/core/rng.hpp"

namespace kinlab {

struct WeakFormEstimate {
    double value = 0;
    double sigma = 0;  // standard error of the MC mean
    double ci(double z = 3.0) const { return z * sigma; }
};

// Monte Carlo estimate of  integral Q(f,f) phi dv  in the symmetrized form
//   1/2 E_{v,v1 ~ f, omega uniform} [ |S^{d-1}| b(v-v1, omega)
//                                     (phi(v') + phi(v1') - phi(v) - phi(v1)) ]
// (the quarter-factor quadruple identity after the pre/post change of
// variables, which is the form computable from samples of f).
// The ensemble weight enters as the density factor of the quadratic operator.
template <int D>
WeakFormEstimate collision_operator_weak(const VelocityEnsemble<D>& ens,
                                         const std::function<double(const Vec<D>&)>& phi,
                                         const DsmcKernel<D>& kernel, std::size_t n_samples,
                                         Rng& rng) {
    const std::size_t n = ens.v.size();
    if (n < 2) throw std::invalid_argument("collision_operator_weak: need >= 2 velocities");
    const double sphere = unit_sphere_area(D);
    const double density = ens.density();

    double sum = 0, sum2 = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::size_t i = rng.below(n);
        std::size_t j = rng.below(n - 1);
        if (j >= i) ++j;
        const Vec<D> omega = rng.unit_vector<D>();
        const Vec<D>&v = ens.v[i], &v1 = ens.v[j];
        const double b = detail::kernel_b<D>(kernel, v - v1, omega);
        double term = 0;
        if (b > 0) {
            auto [vp, v1p] = post_collision_velocities(v, v1, omega);
            term = 0.5 * sphere * b * (phi(vp) + phi(v1p) - phi(v) - phi(v1));
        }
        sum += term;
        sum2 += term * term;
    }
    const double mean = sum / n_samples;
    const double var = std::max(0.0, sum2 / n_samples - mean * mean);
    WeakFormEstimate out;
    out.value = density * density * mean;
    out.sigma = density * density * std::sqrt(var / n_samples);
    return out;
}

}  // namespace kinlab
