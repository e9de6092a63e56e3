#pragma once

#include <cmath>
#include <stdexcept>

#include "kinlab/core/rng.hpp"
#include "kinlab/core/vec.hpp"

namespace kinlab {

// Maxwellian M_{rho,u,theta}(v) = rho (2 pi theta)^{-d/2} exp(-|v-u|^2 / 2 theta).
template <int D>
struct MaxwellianParams {
    double rho = 1.0;
    Vec<D> u{};
    double theta = 1.0;
};

template <int D>
double maxwellian_density(const MaxwellianParams<D>& p, const Vec<D>& v) {
    if (!(p.rho > 0) || !(p.theta > 0))
        throw std::invalid_argument("maxwellian_density: rho > 0 and theta > 0 required");
    const double z = std::pow(2.0 * 3.14159265358979323846 * p.theta, -0.5 * D);
    return p.rho * z * std::exp(-norm2(v - p.u) / (2.0 * p.theta));
}

template <int D>
Vec<D> sample_maxwellian(const MaxwellianParams<D>& p, Rng& rng) {
    const double s = std::sqrt(p.theta);
    Vec<D> v = p.u;
    for (int k = 0; k < D; ++k) v[k] += s * rng.normal();
    return v;
}

// CDF of the equilibrium speed law |v| for a Maxwellian with temperature
// theta: Rayleigh in d=2, Maxwell in d=3. Used by the KS diagnostics.
inline double maxwell_speed_cdf(double speed, double theta, int d) {
    if (speed <= 0) return 0.0;
    const double s2 = speed * speed / (2.0 * theta);
    if (d == 2) return 1.0 - std::exp(-s2);
    if (d == 3)
        return std::erf(speed / std::sqrt(2.0 * theta)) -
               std::sqrt(2.0 / 3.14159265358979323846) * speed * std::exp(-s2) / std::sqrt(theta);
    throw std::invalid_argument("maxwell_speed_cdf: d in {2,3}");
}

}  // namespace kinlab
