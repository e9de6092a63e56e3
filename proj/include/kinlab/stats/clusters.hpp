#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "kinlab/core/histogram.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/core/vec.hpp"

namespace kinlab {

namespace detail {

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t i) {
        while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

  private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

// Membership test for the cluster set Delta_m(X_s): every added point must be
// eps-connected to the base through the proximity graph (the eps-closure of
// the base is the whole set). Union-find over edges |x_i - x_j| <= eps.
template <int D>
bool is_cluster(const std::vector<Vec<D>>& base, const std::vector<Vec<D>>& added, double eps) {
    const std::size_t s = base.size(), m = added.size();
    detail::UnionFind uf(s + m);
    auto at = [&](std::size_t i) -> const Vec<D>& { return i < s ? base[i] : added[i - s]; };
    for (std::size_t i = 0; i < s + m; ++i)
        for (std::size_t j = i + 1; j < s + m; ++j)
            if (norm(at(i) - at(j)) <= eps) uf.unite(i, j);
    // all base points count as one root set: connect them artificially
    for (std::size_t i = 1; i < s; ++i) uf.unite(0, i);
    const std::size_t root = uf.find(0);
    for (std::size_t j = 0; j < m; ++j)
        if (uf.find(s + j) != root) return false;
    return true;
}

struct ClusterVolume {
    double volume = 0;  // estimate of integral over Delta_m(X_s)
    double sigma = 0;
    double bound = 0;   // m! zeta^{-m} exp(zeta kappa_d (s+m) eps^d) at zeta = eps^{-d}
    std::size_t n_samples = 0;
};

// MC volume of the cluster set Delta_m(X_s) inside a sampling box that must
// contain it (points farther than m*eps from every base point cannot belong).
template <int D>
ClusterVolume cluster_volume_mc(const std::vector<Vec<D>>& X_s, int m, double eps,
                                double box_halfwidth, std::size_t n_mc, Rng& rng) {
    if (m < 1 || m > 3) throw std::invalid_argument("cluster_volume_mc: m in [1,3]");
    if (X_s.empty()) throw std::invalid_argument("cluster_volume_mc: base must be nonempty");

    // bounding box around the base, inflated by the sampling bound
    Vec<D> lo = X_s[0], hi = X_s[0];
    for (const auto& x : X_s)
        for (int k = 0; k < D; ++k) {
            lo[k] = std::min(lo[k], x[k]);
            hi[k] = std::max(hi[k], x[k]);
        }
    double box_vol = 1.0;
    for (int k = 0; k < D; ++k) {
        lo[k] -= box_halfwidth;
        hi[k] += box_halfwidth;
        box_vol *= hi[k] - lo[k];
    }

    std::vector<Vec<D>> added(m);
    std::size_t hits = 0;
    for (std::size_t it = 0; it < n_mc; ++it) {
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < D; ++k) added[j][k] = rng.uniform(lo[k], hi[k]);
        if (is_cluster<D>(X_s, added, eps)) ++hits;
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(n_mc);
    ClusterVolume out;
    out.n_samples = n_mc;
    out.volume = frac * std::pow(box_vol, m);
    out.sigma = std::sqrt(std::max(frac * (1 - frac), 1.0 / n_mc) / n_mc) * std::pow(box_vol, m);
    // cluster estimate with activity zeta = eps^{-d}
    const double zeta = std::pow(eps, -D);
    double mfact = 1;
    for (int j = 2; j <= m; ++j) mfact *= j;
    out.bound = mfact * std::pow(zeta, -m) *
                std::exp(zeta * unit_ball_volume(D) * (X_s.size() + m) * std::pow(eps, D));
    return out;
}

}  // namespace kinlab
