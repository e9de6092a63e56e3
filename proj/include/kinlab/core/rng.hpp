#pragma once

#include <cstdint>
#include <cmath>

#include "kinlab/core/vec.hpp"

namespace kinlab {

// Identifies one reproducible random stream. Identical (seed, stream) must
// reproduce identical sample sequences across runs and across worker counts,
// so all parallelism derives child streams instead of sharing a generator.
struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    RngSpec child(std::uint64_t substream) const;
};

namespace detail {
// SplitMix64 output function (Steele, Lea, Flood). Used as a mixing PRF over
// a keyed counter, which makes the generator splittable and position-addressable.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
inline constexpr std::uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL;
}  // namespace detail

// Counter-based generator: output_i = mix(key + i*GOLDEN). The key is a hash
// of (seed, stream), so streams are statistically independent and cheap to split.
class Rng {
  public:
    explicit Rng(RngSpec spec)
        : key_(detail::mix64(spec.seed + detail::mix64(spec.stream * detail::GOLDEN + 1))) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(RngSpec{seed, stream}) {}

    std::uint64_t next_u64() {
        counter_ += detail::GOLDEN;
        return detail::mix64(key_ + counter_);
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal, Marsaglia polar method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    template <int D>
    Vec<D> normal_vec() {
        Vec<D> v;
        for (int i = 0; i < D; ++i) v[i] = normal();
        return v;
    }

    // Uniform on the unit sphere S^{D-1}.
    template <int D>
    Vec<D> unit_vector() {
        while (true) {
            Vec<D> g = normal_vec<D>();
            const double n2 = norm2(g);
            if (n2 > 1e-30) return g / std::sqrt(n2);
        }
    }

    // Uniform in the closed ball of radius r.
    template <int D>
    Vec<D> in_ball(double r) {
        Vec<D> g = unit_vector<D>();
        return g * (r * std::pow(uniform(), 1.0 / D));
    }

    // Uniform in the ball of radius r in R^n (n = D*s), returned flat.
    // Used for joint velocity sampling V_s with |V_s| <= R.
    template <int D>
    void in_ball_joint(double r, int s, Vec<D>* out) {
        double n2 = 0;
        for (int i = 0; i < s; ++i) {
            out[i] = normal_vec<D>();
            n2 += norm2(out[i]);
        }
        const double radius = r * std::pow(uniform(), 1.0 / (D * s));
        const double scale = radius / std::sqrt(n2);
        for (int i = 0; i < s; ++i) out[i] *= scale;
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0;
    bool have_spare_ = false;
};

inline RngSpec RngSpec::child(std::uint64_t substream) const {
    return RngSpec{seed, detail::mix64(stream * detail::GOLDEN + substream + 0x51ED2701ULL)};
}

}  // namespace kinlab
