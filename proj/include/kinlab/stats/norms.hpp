#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kinlab/core/histogram.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/core/types.hpp"

namespace kinlab {

// Weighted-norm parameters for |g|_{eps,s,beta} = sup |g| exp(beta E).
// epsilon = 0 selects the free Hamiltonian (Boltzmann norms); epsilon > 0
// weights with E_eps and restricts to the exclusion domain D_s.
struct NormSpec {
    double beta = 1.0;
    double mu = 0.0;
    double epsilon = 0.0;

    void validate() const {
        if (!(beta > 0)) throw std::invalid_argument("NormSpec: beta > 0 required");
    }
};

struct NormEstimate {
    double value = 0;          // grid max of |g| e^{beta E}: a lower bound on the sup
    PhaseConfiguration<2> arg_max2;  // populated for D=2 evaluations
    std::size_t evaluations = 0;
};

// Grid/MC maximization of |g(Z_s)| exp(beta E(Z_s)) over sampled
// configurations. Diagnostic only: a lower bound on the true sup.
template <int D>
NormEstimate weighted_norm(const std::function<double(const PhaseConfiguration<D>&)>& g,
                           const NormSpec& spec, const PotentialSpec& phi, int s,
                           double x_halfwidth, double v_halfwidth, std::size_t n_grid, Rng& rng) {
    spec.validate();
    NormEstimate out;
    PhaseConfiguration<D> Z(s);
    for (std::size_t it = 0; it < n_grid; ++it) {
        for (auto& z : Z)
            for (int k = 0; k < D; ++k) {
                z.x[k] = rng.uniform(-x_halfwidth, x_halfwidth);
                z.v[k] = rng.uniform(-v_halfwidth, v_halfwidth);
            }
        if (spec.epsilon > 0 && !respects_exclusion(Z, spec.epsilon)) continue;
        const double E = spec.epsilon > 0 ? epsilon_hamiltonian(Z, phi, spec.epsilon)
                                          : free_hamiltonian(Z);
        const double val = std::abs(g(Z)) * std::exp(spec.beta * E);
        ++out.evaluations;
        if (val > out.value) out.value = val;
    }
    return out;
}

// integral phi(V_s) h(X_s, V_s) dV_s by cell summation of a sampled marginal
// histogram over velocities (the histogram being the velocity slice at X_s).
template <int D>
double observable_average(const Histogram& h, const std::function<double(const std::vector<Vec<D>>&)>& phi,
                          int s) {
    if (h.dim() != static_cast<std::size_t>(s) * D)
        throw std::invalid_argument("observable_average: histogram dimension mismatch");
    double acc = 0;
    std::vector<Vec<D>> V(s);
    for (std::size_t idx = 0; idx < h.size(); ++idx) {
        if (h.counts()[idx] == 0) continue;
        for (int i = 0; i < s; ++i)
            for (int k = 0; k < D; ++k)
                V[i][k] = h.center(idx, static_cast<std::size_t>(i * D + k));
        acc += phi(V) * h.density(idx) * h.cell_volume();
    }
    return acc;
}

}  // namespace kinlab
