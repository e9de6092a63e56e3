#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kinlab/boltzmann/dsmc.hpp"
#include "kinlab/core/histogram.hpp"

namespace kinlab {

struct EntropyEstimate {
    double H = 0;       // estimate of  integral f log f dv  (decreases under the flow)
    double sigma = 0;   // delta-method standard error
    std::size_t occupied_bins = 0;
};

// Histogram estimate of H[f] = integral f log f dv with Miller-Madow bias
// correction. The histogram resolves the mass inside its box; out-of-range
// mass is ignored (keep v_max generous).
template <int D>
EntropyEstimate entropy(const VelocityEnsemble<D>& ens, const Histogram::Axis& axis_spec) {
    if (ens.v.empty()) throw std::invalid_argument("entropy: empty ensemble");
    std::vector<Histogram::Axis> axes(D, axis_spec);
    Histogram h(std::move(axes));
    double x[3];
    for (const auto& u : ens.v) {
        for (int k = 0; k < D; ++k) x[k] = u[k];
        h.add(x);
    }
    const double n = static_cast<double>(ens.v.size());
    const double log_vol = std::log(h.cell_volume());

    EntropyEstimate out;
    double mean = 0, mean2 = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double p = h.p(i);
        if (p <= 0) continue;
        ++out.occupied_bins;
        const double l = std::log(p) - log_vol;  // log density
        mean += p * l;
        mean2 += p * l * l;
    }
    // discrete-entropy Miller-Madow correction, sign-flipped for f log f
    out.H = mean - static_cast<double>(out.occupied_bins - 1) / (2.0 * n);
    out.sigma = std::sqrt(std::max(0.0, mean2 - mean * mean) / n);
    return out;
}

// Closed form for a d-dimensional Gaussian with covariance theta I:
// integral M log M = -d/2 (1 + log(2 pi theta)) for unit mass.
inline double gaussian_entropy_reference(double theta, int d) {
    return -0.5 * d * (1.0 + std::log(2.0 * 3.14159265358979323846 * theta));
}

}  // namespace kinlab
