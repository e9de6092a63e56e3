#pragma once

#include <stdexcept>
#include <vector>

#include "kinlab/core/histogram.hpp"
#include "kinlab/core/types.hpp"

namespace kinlab {

struct MarginalSpec {
    double v_max = 5.0;      // velocity box [-v_max, v_max)^d per particle
    std::size_t bins = 24;   // per axis
};

// Symmetrized empirical velocity marginal of order s (s = 1 or 2) from a set
// of configuration snapshots. The histogram integrates to 1 over its box;
// weight falling outside is tracked by the histogram itself.
template <int D>
Histogram empirical_marginal(const std::vector<PhaseConfiguration<D>>& snapshots, int s,
                             const MarginalSpec& spec) {
    if (s != 1 && s != 2) throw std::invalid_argument("empirical_marginal: s in {1,2}");
    if (snapshots.empty()) throw std::invalid_argument("empirical_marginal: no snapshots");

    std::vector<Histogram::Axis> axes(static_cast<std::size_t>(s) * D,
                                      {-spec.v_max, spec.v_max, spec.bins});
    Histogram h(std::move(axes));
    double x[6];
    for (const auto& snap : snapshots) {
        const std::size_t n = snap.size();
        if (s == 1) {
            for (const auto& z : snap) {
                for (int k = 0; k < D; ++k) x[k] = z.v[k];
                h.add(x);
            }
        } else {
            // symmetrization over ordered pairs (i, j), i != j
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j) continue;
                    for (int k = 0; k < D; ++k) {
                        x[k] = snap[i].v[k];
                        x[D + k] = snap[j].v[k];
                    }
                    h.add(x);
                }
        }
    }
    return h;
}

}  // namespace kinlab
