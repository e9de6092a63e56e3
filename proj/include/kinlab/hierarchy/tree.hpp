#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kinlab/core/histogram.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/core/vec.hpp"

namespace kinlab {

// Truncation parameters of the hierarchy expansion. Scales: n is a tree
// depth, R a velocity, delta a time, eta a velocity, eps0 and a distances.
// Ordering a << eps0 << eta*delta is enforced with a ratio margin.
struct TruncationParams {
    int n = 2;
    double R = 2.0;
    double delta = 0.1;
    double eta = 0.1;
    double eps0 = 1e-3;
    double a = 1e-5;
    double ordering_margin = 10.0;

    bool ordering_ok() const {
        return a * ordering_margin <= eps0 && eps0 * ordering_margin <= eta * delta;
    }
    void validate() const {
        if (n < 0 || !(R > 0) || !(delta > 0) || !(eta > 0) || !(eps0 > 0) || !(a > 0))
            throw std::invalid_argument("TruncationParams: all scales must be positive");
        if (!ordering_ok())
            throw std::invalid_argument(
                "TruncationParams: ordering a << eps0 << eta*delta violated");
    }
};

// Convergence-rate parameter schedule: n ~ C1 |log eps|, R^2 ~ C2 |log eps|,
// delta = eps^{(d-1)/(d+1)}, eps0 = eps^{d/(d+1)}; eta and a are then chosen
// to satisfy the ordering constraints. eta defaults to 10 sqrt(eps0/delta)
// but stays a usable velocity cutoff (<= R/2); at desk-scale eps the ratio
// margin that leaves room for such an eta is below the asymptotic 10 and the
// schedule records the margin it can actually honor (>= 2, else it fails).
inline TruncationParams truncation_schedule(double eps, int d, double C1 = 1.0, double C2 = 2.0) {
    if (!(eps > 0) || eps >= 1) throw std::invalid_argument("truncation_schedule: eps in (0,1)");
    if (d != 2 && d != 3) throw std::invalid_argument("truncation_schedule: d in {2,3}");
    const double L = std::abs(std::log(eps));
    TruncationParams p;
    p.n = static_cast<int>(std::ceil(C1 * L));
    p.R = std::sqrt(C2 * L);
    p.delta = std::pow(eps, static_cast<double>(d - 1) / (d + 1));
    p.eps0 = std::pow(eps, static_cast<double>(d) / (d + 1));
    p.eta = std::min(10.0 * std::sqrt(p.eps0 / p.delta), 0.5 * p.R);
    p.ordering_margin = std::min(10.0, 0.999 * p.eta * p.delta / p.eps0);
    if (p.ordering_margin < 2.0)
        throw std::invalid_argument(
            "truncation_schedule: ordering unsatisfiable (eps too large for a usable eta)");
    p.a = std::min(eps, p.eps0 / p.ordering_margin);
    p.validate();
    return p;
}

// Combinatorial datum of one pseudo-trajectory: k particles adjoined to a
// root of size s at strictly decreasing times, each with a sign (+: post-,
// -: pre-collisional), a parent index, a sphere direction and a velocity.
template <int D>
struct CollisionTree {
    int s = 1;
    int k = 0;
    double t = 0;                  // observation time
    std::vector<int> signs;        // +1 / -1, size k
    std::vector<int> parents;      // m_i in [0, s+i-1)  (0-based)
    std::vector<double> times;     // t > t_1 > ... > t_k > 0
    std::vector<Vec<D>> nus;       // unit vectors
    std::vector<Vec<D>> vs;        // velocities in B_R
    // importance-weight factors of the uniform sampling measure
    double simplex_volume = 1.0;     // delta-separated time simplex
    double angle_vel_volume = 1.0;   // (|S^{d-1}| |B_R|)^k
    double parent_count = 1.0;       // number of (M) choices, 1 if M was fixed
    double sampling_volume() const { return simplex_volume * angle_vel_volume * parent_count; }

    bool respects(const TruncationParams& p, bool delta_separated) const {
        if (k != static_cast<int>(times.size())) return false;
        double prev = t;
        for (int i = 0; i < k; ++i) {
            const double gap = prev - times[i];
            if (!(times[i] > 0)) return false;
            if (delta_separated ? gap < p.delta : gap <= 0) return false;
            prev = times[i];
        }
        if (delta_separated && k > 0 && times.back() < p.delta) return false;
        for (int i = 0; i < k; ++i) {
            if (parents[i] < 0 || parents[i] >= s + i) return false;
            if (norm(vs[i]) > p.R * (1 + 1e-12)) return false;
            if (std::abs(norm(nus[i]) - 1.0) > 1e-9) return false;
        }
        return true;
    }
};

// Uniform sample of the delta-separated time simplex
// {t > t_1 > ... > t_k > 0, gaps >= delta, including t - t_1 and t_k - 0},
// by the affine shift of an ordered uniform sample on (0, t - (k+1) delta).
// signs are left to the caller (defaulted to -1).
template <int D>
CollisionTree<D> sample_tree(int s, int k, double t, const TruncationParams& params, Rng& rng,
                             bool delta_separated = true) {
    if (k > params.n) throw std::invalid_argument("sample_tree: k <= params.n required");
    const double delta = delta_separated ? params.delta : 0.0;
    const double slack = t - (k + 1) * delta;
    if (k > 0 && !(slack > 0))
        throw std::invalid_argument("sample_tree: t too small for k delta-separated times");

    CollisionTree<D> tree;
    tree.s = s;
    tree.k = k;
    tree.t = t;
    tree.signs.assign(k, -1);
    tree.parents.resize(k);
    tree.times.resize(k);
    tree.nus.resize(k);
    tree.vs.resize(k);

    // ordered uniforms, descending
    std::vector<double> u(k);
    for (int i = 0; i < k; ++i) u[i] = rng.uniform() * slack;
    std::sort(u.begin(), u.end(), std::greater<double>());
    for (int i = 0; i < k; ++i) {
        tree.times[i] = u[i] + (k - i) * delta;
        tree.simplex_volume *= slack / static_cast<double>(i + 1);
    }

    const double sphere = unit_sphere_area(D);
    const double ball = unit_ball_volume(D) * std::pow(params.R, D);
    for (int i = 0; i < k; ++i) {
        tree.parents[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(s + i)));
        tree.parent_count *= static_cast<double>(s + i);
        tree.nus[i] = rng.unit_vector<D>();
        tree.vs[i] = rng.in_ball<D>(params.R);
        tree.angle_vel_volume *= sphere * ball;
    }
    return tree;
}

// Same time/angle/velocity sampling with (J, M) held fixed: used when the
// elementary functional at a specific sign/parent assignment is wanted.
template <int D>
CollisionTree<D> sample_tree_fixed_jm(int s, int k, double t, const TruncationParams& params,
                                      const std::vector<int>& signs,
                                      const std::vector<int>& parents, Rng& rng,
                                      bool delta_separated = true) {
    CollisionTree<D> tree = sample_tree<D>(s, k, t, params, rng, delta_separated);
    if (static_cast<int>(signs.size()) != k || static_cast<int>(parents.size()) != k)
        throw std::invalid_argument("sample_tree_fixed_jm: J, M must have size k");
    tree.signs = signs;
    tree.parents = parents;
    tree.parent_count = 1.0;
    for (int i = 0; i < k; ++i)
        if (parents[i] < 0 || parents[i] >= s + i)
            throw std::invalid_argument("sample_tree_fixed_jm: parent index out of range");
    return tree;
}

}  // namespace kinlab
