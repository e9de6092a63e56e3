#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kinlab/core/potential.hpp"
#include "kinlab/core/vec.hpp"

namespace kinlab {

template <int D>
struct PhasePoint {
    Vec<D> x;  // position
    Vec<D> v;  // velocity
};

// Ordered list of phase points (the Z_s of the hierarchy formalism).
template <int D>
using PhaseConfiguration = std::vector<PhasePoint<D>>;

// Pairwise hard-core exclusion |x_i - x_j| >= eps. Checked by predicate,
// not enforced by construction.
template <int D>
bool respects_exclusion(const PhaseConfiguration<D>& Z, double eps) {
    for (std::size_t i = 0; i < Z.size(); ++i)
        for (std::size_t j = i + 1; j < Z.size(); ++j)
            if (norm(Z[i].x - Z[j].x) < eps) return false;
    return true;
}

// Returns eps with N * eps^{d-1} = 1.
inline double boltzmann_grad_epsilon(std::size_t N, int d) {
    if (N < 1) throw std::invalid_argument("boltzmann_grad_epsilon: N >= 1 required");
    if (d != 2 && d != 3) throw std::invalid_argument("boltzmann_grad_epsilon: d must be 2 or 3");
    return std::pow(static_cast<double>(N), -1.0 / (d - 1));
}

// Low-density scaling record.
struct SimScaling {
    std::size_t N = 1;
    double epsilon = 1.0;
    int d = 2;

    // Relative deviation from N eps^{d-1} = 1.
    double grad_defect() const {
        return std::abs(static_cast<double>(N) * std::pow(epsilon, d - 1) - 1.0);
    }
    bool is_boltzmann_grad(double rel_tol = 1e-12) const { return grad_defect() <= rel_tol; }

    static SimScaling boltzmann_grad(std::size_t N, int d) {
        return SimScaling{N, boltzmann_grad_epsilon(N, d), d};
    }
};

// E_0(Z_s) = sum |v_i|^2 / 2.
template <int D>
double free_hamiltonian(const PhaseConfiguration<D>& Z) {
    double e = 0;
    for (const auto& z : Z) e += 0.5 * norm2(z.v);
    return e;
}

// E_eps(Z_s) = E_0 + sum_{i<k} phi(|x_i-x_k|/eps). Returns +infinity when two
// particles coincide (the potential is unbounded near zero).
template <int D>
double epsilon_hamiltonian(const PhaseConfiguration<D>& Z, const PotentialSpec& phi, double eps) {
    if (!(eps > 0)) throw std::invalid_argument("epsilon_hamiltonian: eps > 0 required");
    double e = free_hamiltonian(Z);
    for (std::size_t i = 0; i < Z.size(); ++i)
        for (std::size_t k = i + 1; k < Z.size(); ++k) {
            const double r = norm(Z[i].x - Z[k].x) / eps;
            if (r == 0.0) return std::numeric_limits<double>::infinity();
            if (r < 1.0) e += phi.phi(r);
        }
    return e;
}

}  // namespace kinlab
