#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace kinlab {

// Regular-grid histogram over a box in R^n (n fixed at construction).
// Counts are accumulated per cell; densities normalize by total weight and
// cell volume so the estimate integrates to 1 over the box.
class Histogram {
  public:
    struct Axis {
        double lo, hi;
        std::size_t bins;
    };

    explicit Histogram(std::vector<Axis> axes) : axes_(std::move(axes)) {
        std::size_t n = 1;
        cell_vol_ = 1.0;
        for (const auto& a : axes_) {
            if (a.bins == 0 || !(a.hi > a.lo)) throw std::invalid_argument("Histogram: bad axis");
            n *= a.bins;
            cell_vol_ *= (a.hi - a.lo) / a.bins;
        }
        counts_.assign(n, 0.0);
    }

    std::size_t dim() const { return axes_.size(); }
    std::size_t size() const { return counts_.size(); }
    double cell_volume() const { return cell_vol_; }
    double total_weight() const { return total_; }
    double out_of_range_weight() const { return dropped_; }
    const std::vector<double>& counts() const { return counts_; }
    const std::vector<Axis>& axes() const { return axes_; }

    // flat index, or npos when the point falls outside the box
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t index(const double* x) const {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < axes_.size(); ++k) {
            const auto& a = axes_[k];
            if (x[k] < a.lo || x[k] >= a.hi) return npos;
            const auto b = static_cast<std::size_t>((x[k] - a.lo) / (a.hi - a.lo) * a.bins);
            idx = idx * a.bins + std::min(b, a.bins - 1);
        }
        return idx;
    }

    void add(const double* x, double w = 1.0) {
        const std::size_t idx = index(x);
        total_ += w;
        if (idx == npos) {
            dropped_ += w;
            return;
        }
        counts_[idx] += w;
    }

    // probability mass of a cell, normalized over the in-range weight so the
    // histogram integrates to 1 over its box
    double p(std::size_t idx) const {
        const double in_range = total_ - dropped_;
        return in_range > 0 ? counts_[idx] / in_range : 0.0;
    }
    // density estimate of a cell
    double density(std::size_t idx) const { return p(idx) / cell_vol_; }

    double center(std::size_t flat, std::size_t axis) const {
        // decompose flat index
        std::vector<std::size_t> id(axes_.size());
        for (std::size_t k = axes_.size(); k-- > 0;) {
            id[k] = flat % axes_[k].bins;
            flat /= axes_[k].bins;
        }
        const auto& a = axes_[axis];
        return a.lo + (id[axis] + 0.5) * (a.hi - a.lo) / a.bins;
    }

  private:
    std::vector<Axis> axes_;
    std::vector<double> counts_;
    double cell_vol_ = 1.0;
    double total_ = 0.0;
    double dropped_ = 0.0;
};

// n-dimensional unit-ball volume kappa_d.
inline double unit_ball_volume(int d) {
    if (d == 1) return 2.0;
    if (d == 2) return 3.14159265358979323846;
    if (d == 3) return 4.0 / 3.0 * 3.14159265358979323846;
    throw std::invalid_argument("unit_ball_volume: d in {1,2,3}");
}

// Surface area of the unit sphere S^{d-1}.
inline double unit_sphere_area(int d) {
    return d * unit_ball_volume(d);
}

}  // namespace kinlab
