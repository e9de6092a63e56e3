#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include "kinlab/core/types.hpp"
#include "kinlab/core/vec.hpp"

namespace kinlab {

enum class EventKind : std::uint8_t {
    pair_collision,
    wall_wrap,
    pathological_grazing,
    pathological_triple,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::pair_collision: return "pair_collision";
        case EventKind::wall_wrap: return "wall_wrap";
        case EventKind::pathological_grazing: return "pathological_grazing";
        case EventKind::pathological_triple: return "pathological_triple";
    }
    return "?";
}

struct CollisionEvent {
    double time = 0;
    int i = -1;
    int j = -1;  // -1 for wall events
    EventKind kind = EventKind::pair_collision;
};

struct EventCounters {
    std::uint64_t pair_collision = 0;
    std::uint64_t wall_wrap = 0;
    std::uint64_t pathological_grazing = 0;
    std::uint64_t pathological_triple = 0;
    // scheduler load diagnostics
    std::uint64_t pops = 0;
    std::uint64_t stale_pops = 0;
    std::uint64_t schedule_calls = 0;
};

// Earliest positive root of |dx + t dv| = eps with approach condition.
// Inputs are the current relative displacement and velocity; returns nothing
// for separating or parallel motion.
template <int D>
std::optional<double> predict_from_relative(const Vec<D>& dx, const Vec<D>& dv, double eps) {
    const double b = dot(dx, dv);
    if (b >= 0.0) return std::nullopt;  // receding
    const double a = norm2(dv);
    if (a == 0.0) return std::nullopt;
    const double c = norm2(dx) - eps * eps;
    if (c <= 0.0) return 0.0;  // touching within rounding and approaching
    const double disc = b * b - a * c;
    if (disc <= 0.0) return std::nullopt;  // misses the eps-sphere
    const double t = (-b - std::sqrt(disc)) / a;
    if (t < 0.0) return std::nullopt;
    return t;
}

template <int D>
std::optional<double> predict_pair_collision(const PhasePoint<D>& zi, const PhasePoint<D>& zj,
                                             double eps) {
    return predict_from_relative<D>(zi.x - zj.x, zi.v - zj.v, eps);
}

enum class ReflectStatus { ok, grazing };

// Elastic reflection along the unit contact vector nu = (x_i - x_j)/|.|.
// Grazing contacts (|nu.(v_i - v_j)| below tolerance) are signalled, not
// resolved; the caller counts them and continues.
template <int D>
ReflectStatus reflect(Vec<D>& vi, Vec<D>& vj, const Vec<D>& nu,
                      double grazing_tol = 1e-12) {
    if (std::abs(norm(nu) - 1.0) > 1e-12)
        throw std::invalid_argument("reflect: |nu| = 1 required");
    const Vec<D> dv = vi - vj;
    const double wn = dot(nu, dv);
    if (std::abs(wn) < grazing_tol * std::max(1.0, norm(dv))) return ReflectStatus::grazing;
    vi -= wn * nu;
    vj += wn * nu;
    return ReflectStatus::ok;
}

enum class MdDomain { free_space, periodic_box };

// Event-driven hard-sphere state. The event queue uses lazy invalidation:
// events record per-particle collision counters and stale entries are
// discarded on pop.
template <int D>
class MdState {
  public:
    MdState(PhaseConfiguration<D> config, double eps, MdDomain domain = MdDomain::free_space,
            double box_side = 0.0)
        : z_(std::move(config)), eps_(eps), domain_(domain), box_(box_side) {
        if (domain_ == MdDomain::periodic_box) {
            if (!(box_ > 2.0 * eps_))
                throw std::invalid_argument("MdState: box side must exceed 2 eps");
            for (auto& p : z_) wrap_into_box(p.x);
        }
        if (!respects_exclusion(z_, eps_ * (1.0 - 1e-12)))
            throw std::invalid_argument("MdState: initial configuration violates exclusion");
        last_update_.assign(z_.size(), 0.0);
        collisions_.assign(z_.size(), 0);
        wraps_.assign(z_.size(), 0);
        rebuild_queue();
    }

    double t() const { return t_; }
    double epsilon() const { return eps_; }
    const EventCounters& counters() const { return counters_; }
    std::size_t size() const { return z_.size(); }
    // worst relative deviation of the pair distance from eps at processed events
    double max_event_distance_defect() const { return max_event_defect_; }

    // Snapshot with all positions synchronized to the current time.
    PhaseConfiguration<D> config() const {
        PhaseConfiguration<D> out = z_;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].x += (t_ - last_update_[i]) * out[i].v;
            if (domain_ == MdDomain::periodic_box) wrap_into_box(out[i].x);
        }
        return out;
    }

    Vec<D> total_momentum() const {
        Vec<D> p{};
        for (const auto& z : z_) p += z.v;
        return p;
    }
    double kinetic_energy() const {
        double e = 0;
        for (const auto& z : z_) e += 0.5 * norm2(z.v);
        return e;
    }

    // Advances the event loop to time T. Near-simultaneous events sharing a
    // particle within the tie tolerance are counted pathological and resolved
    // in index order.
    void run_to(double T, std::vector<CollisionEvent>* log = nullptr) {
        if (T < t_) throw std::invalid_argument("run_to: T >= current time required");
        while (!queue_.empty() && queue_.top().time <= T) {
            QueuedEvent ev = queue_.top();
            queue_.pop();
            ++counters_.pops;
            if (stale(ev)) {
                ++counters_.stale_pops;
                continue;
            }

            if (ev.kind == EventKind::wall_wrap) {
                advance_particle(ev.i, ev.time);
                // fold the axis that fired by a full period; rounding may have
                // left the coordinate just shy of the boundary, so the fold is
                // forced rather than floor-based
                const int axis = ev.j;
                auto& x = z_[ev.i].x;
                if (z_[ev.i].v[axis] > 0) {
                    x[axis] -= box_;
                    if (x[axis] < 0) x[axis] = 0;
                } else {
                    x[axis] += box_;
                    if (x[axis] >= box_) x[axis] = std::nextafter(box_, 0.0);
                }
                sync_soa(ev.i);
                ++wraps_[ev.i];
                ++counters_.wall_wrap;
                // the image window {-L,0,L} is anchored at the prediction-time
                // positions, so predictions go stale once a particle wraps;
                // refresh everything involving this particle
                ++collisions_[ev.i];
                schedule_particle(ev.i);
                repair_partners(ev.i, -1);
                if (log) log->push_back({ev.time, ev.i, -1, EventKind::wall_wrap});
                continue;
            }

            // pair event: detect a near-simultaneous event sharing a particle
            if (!queue_.empty()) {
                const QueuedEvent& nxt = queue_.top();
                if (nxt.kind == EventKind::pair_collision && !stale(nxt) &&
                    nxt.time - ev.time < tie_tol_ &&
                    (nxt.i == ev.i || nxt.i == ev.j || nxt.j == ev.i || nxt.j == ev.j)) {
                    ++counters_.pathological_triple;
                    if (log) log->push_back({ev.time, ev.i, ev.j, EventKind::pathological_triple});
                    // processed in index order: keep ev (it popped first; ties
                    // in the queue comparator already order by indices)
                }
            }

            advance_particle(ev.i, ev.time);
            advance_particle(ev.j, ev.time);
            t_ = ev.time;

            Vec<D> nu = minimum_image(z_[ev.i].x - z_[ev.j].x);
            const double dist = norm(nu);
            max_event_defect_ = std::max(max_event_defect_, std::abs(dist - eps_) / eps_);
            if (std::abs(dist - eps_) > 1e-8 * eps_) {
                // stale geometry would indicate a scheduling bug
                std::ostringstream os;
                os << "run_to: pair event at distance " << dist << " (eps=" << eps_ << ")";
                throw std::runtime_error(os.str());
            }
            nu = nu / dist;
            const ReflectStatus st = reflect(z_[ev.i].v, z_[ev.j].v, nu, grazing_tol_);
            sync_soa(ev.i);
            sync_soa(ev.j);
            if (st == ReflectStatus::grazing) {
                ++counters_.pathological_grazing;
                if (log) log->push_back({ev.time, ev.i, ev.j, EventKind::pathological_grazing});
                ++collisions_[ev.i];
                ++collisions_[ev.j];
                schedule_particle(ev.i, ev.j);
                schedule_particle(ev.j, ev.i);
                repair_partners(ev.i, ev.j);
                // the tangent pair passes through: re-predict it from just past
                // the closest approach so the same root cannot fire again
                const double rel = std::max(norm(z_[ev.i].v - z_[ev.j].v), 1e-12);
                if (auto t2 = predict_pair(std::min(ev.i, ev.j), std::max(ev.i, ev.j),
                                           ev.time + 1e-6 * eps_ / rel))
                    queue_.push({*t2, std::min(ev.i, ev.j), std::max(ev.i, ev.j),
                                 EventKind::pair_collision, collisions_[std::min(ev.i, ev.j)],
                                 collisions_[std::max(ev.i, ev.j)]});
                continue;
            }
            ++counters_.pair_collision;
            ++collisions_[ev.i];
            ++collisions_[ev.j];
            if (log) log->push_back({ev.time, ev.i, ev.j, EventKind::pair_collision});
            schedule_particle(ev.i);
            schedule_particle(ev.j);
            repair_partners(ev.i, ev.j);
        }
        // free flight to T
        for (std::size_t i = 0; i < z_.size(); ++i) advance_particle(static_cast<int>(i), T);
        t_ = T;
        check_overlap();
    }

    // Runs forward by T, negates all velocities, runs forward by T again and
    // reports the maximal position defect against the initial configuration.
    double reversibility_check(double T) {
        const PhaseConfiguration<D> initial = config();
        run_to(t_ + T);
        for (auto& z : z_) z.v = -z.v;
        rebuild_queue();
        run_to(t_ + T);
        const PhaseConfiguration<D> final = config();
        double worst = 0;
        for (std::size_t i = 0; i < final.size(); ++i) {
            Vec<D> d = minimum_image(final[i].x - initial[i].x);
            worst = std::max(worst, norm(d));
        }
        return worst;
    }

    void set_grazing_tol(double tol) { grazing_tol_ = tol; }
    void set_tie_tol(double tol) { tie_tol_ = tol; }

  private:
    struct QueuedEvent {
        double time;
        int i, j;
        EventKind kind;
        std::uint64_t count_i, count_j;
        bool operator>(const QueuedEvent& o) const {
            if (time != o.time) return time > o.time;
            if (i != o.i) return i > o.i;  // deterministic tie-break in index order
            return j > o.j;
        }
    };

    bool stale(const QueuedEvent& ev) const {
        if (ev.count_i != collisions_[ev.i]) return true;
        if (ev.kind == EventKind::pair_collision) return ev.count_j != collisions_[ev.j];
        return ev.count_j != wraps_[ev.i];  // wall events invalidated by wraps
    }

    void advance_particle(int i, double time) {
        z_[i].x += (time - last_update_[i]) * z_[i].v;
        last_update_[i] = time;
        sync_soa(i);
    }

    // structure-of-arrays mirror of (x, v, last_update) for the hot scan
    void sync_soa(int i) {
        for (int k = 0; k < D; ++k) {
            sx_[k][i] = z_[i].x[k];
            sv_[k][i] = z_[i].v[k];
        }
        slu_[i] = last_update_[i];
    }
    void sync_soa_all() {
        for (int k = 0; k < D; ++k) {
            sx_[k].resize(z_.size());
            sv_[k].resize(z_.size());
        }
        slu_.resize(z_.size());
        for (std::size_t i = 0; i < z_.size(); ++i) sync_soa(static_cast<int>(i));
    }

    void wrap_into_box(Vec<D>& x) const {
        if (domain_ != MdDomain::periodic_box) return;
        for (int k = 0; k < D; ++k) {
            x[k] -= box_ * std::floor(x[k] / box_);
            if (x[k] >= box_) x[k] -= box_;  // guard against floor rounding
        }
    }

    Vec<D> minimum_image(Vec<D> d) const {
        if (domain_ == MdDomain::periodic_box)
            for (int k = 0; k < D; ++k) d[k] -= box_ * std::round(d[k] / box_);
        return d;
    }

    // Earliest root of one relative line against the eps-sphere, or +inf.
    // b = dx.dv and c = |dx|^2 - eps^2 are supplied pre-shifted by the caller.
    static double root_from_coeffs(double a, double b, double c) {
        if (b >= 0.0) return std::numeric_limits<double>::infinity();
        if (c <= 0.0) return 0.0;  // touching within rounding and approaching
        const double disc = b * b - a * c;
        if (disc <= 0.0) return std::numeric_limits<double>::infinity();
        const double t = (-b - std::sqrt(disc)) / a;
        return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
    }

    static double root_or_inf(const Vec<D>& dx, const Vec<D>& dv, double a, double eps) {
        return root_from_coeffs(a, dot(dx, dv), norm2(dx) - eps * eps);
    }

    // slow path for pairs hugging a wall: full per-axis offset enumeration
    // including the image opposite to the drift direction
    double predict_pair_hugging(const Vec<D>& dx, const Vec<D>& dv, double a) const {
        double off[D][3];
        int n_off[D];
        for (int k = 0; k < D; ++k) {
            off[k][0] = 0.0;
            n_off[k] = 1;
            if (dv[k] > 0 || dx[k] >= box_ - eps_) off[k][n_off[k]++] = -box_;
            if (dv[k] < 0 || dx[k] <= -(box_ - eps_)) off[k][n_off[k]++] = box_;
        }
        int combos = 1;
        for (int k = 0; k < D; ++k) combos *= n_off[k];
        double best = std::numeric_limits<double>::infinity();
        for (int m = 0; m < combos; ++m) {
            Vec<D> s = dx;
            int code = m;
            for (int k = 0; k < D; ++k) {
                s[k] += off[k][code % n_off[k]];
                code /= n_off[k];
            }
            best = std::min(best, root_or_inf(s, dv, a, eps_));
        }
        return best;
    }

    // Predicts the collision of pair (i, j), scanning periodic images where
    // applicable. Positions are extrapolated to a common time first
    // (or to `from_time` when given). Both positions live in [0, L)^D between
    // wall events, and every wrap re-anchors the pair, so per axis only the
    // current offset and the one the pair drifts toward can reach a contact.
    std::optional<double> predict_pair(int i, int j, double from_time = -1.0) const {
        const double t0 = std::max({last_update_[i], last_update_[j], from_time});
        const Vec<D> dv = z_[i].v - z_[j].v;
        Vec<D> dx = (z_[i].x + (t0 - last_update_[i]) * z_[i].v) -
                    (z_[j].x + (t0 - last_update_[j]) * z_[j].v);
        const double a = norm2(dv);
        if (a == 0.0) return std::nullopt;
        bool hugging = false;
        if (domain_ == MdDomain::periodic_box)
            for (int k = 0; k < D; ++k) hugging = hugging || std::abs(dx[k]) >= box_ - eps_;
        double best;
        if (domain_ == MdDomain::free_space) {
            best = root_or_inf(dx, dv, a, eps_);
        } else if (hugging) {
            best = predict_pair_hugging(dx, dv, a);
        } else {
            // fast path: per axis only the drift-direction image matters; the
            // shifted coefficients follow incrementally (shift o in axis k adds
            // o*dv_k to b and 2*o*dx_k + o^2 to c)
            const double b0 = dot(dx, dv);
            const double c0 = norm2(dx) - eps_ * eps_;
            best = root_from_coeffs(a, b0, c0);
            double db[D], dc[D];
            for (int k = 0; k < D; ++k) {
                const double o = dv[k] > 0 ? -box_ : box_;
                db[k] = o * dv[k];
                dc[k] = o * (2.0 * dx[k] + o);
            }
            for (int m = 1; m < (1 << D); ++m) {
                double b = b0, c = c0;
                for (int k = 0; k < D; ++k)
                    if (m & (1 << k)) {
                        b += db[k];
                        c += dc[k];
                    }
                best = std::min(best, root_from_coeffs(a, b, c));
            }
        }
        if (!std::isfinite(best)) return std::nullopt;
        return best + t0;
    }

    double next_wall_time(int i, int& axis) const {
        axis = -1;
        if (domain_ != MdDomain::periodic_box) return std::numeric_limits<double>::infinity();
        double earliest = std::numeric_limits<double>::infinity();
        const auto& z = z_[i];
        for (int k = 0; k < D; ++k) {
            if (z.v[k] == 0) continue;
            const double t_axis =
                std::max((z.v[k] > 0 ? box_ - z.x[k] : z.x[k]) / std::abs(z.v[k]), 0.0);
            if (t_axis < earliest) {
                earliest = t_axis;
                axis = k;
            }
        }
        return last_update_[i] + earliest;
    }

    // Absolute-time root of pair (i, j), +inf when none. Scalar kernel used by
    // the plain scan, the AVX tail, and the rare hugging lanes.
    double pair_root_abs(int i, int j) const {
        const double lui = slu_[i], luj = slu_[j];
        const double t0 = luj > lui ? luj : lui;
        Vec<D> dx, dv;
        double a = 0;
        for (int k = 0; k < D; ++k) {
            dv[k] = sv_[k][i] - sv_[k][j];
            dx[k] = (sx_[k][i] + (t0 - lui) * sv_[k][i]) - (sx_[k][j] + (t0 - luj) * sv_[k][j]);
            a += dv[k] * dv[k];
        }
        if (a == 0.0) return std::numeric_limits<double>::infinity();
        double root;
        bool hugging = false;
        if (domain_ == MdDomain::periodic_box) {
            const double edge = box_ - eps_;
            for (int k = 0; k < D; ++k) hugging = hugging || std::abs(dx[k]) >= edge;
        }
        if (domain_ == MdDomain::free_space) {
            root = root_or_inf(dx, dv, a, eps_);
        } else if (hugging) {
            root = predict_pair_hugging(dx, dv, a);
        } else {
            double b0 = 0, c0 = -eps_ * eps_;
            double db[D], dc[D];
            for (int k = 0; k < D; ++k) {
                b0 += dx[k] * dv[k];
                c0 += dx[k] * dx[k];
                const double o = dv[k] > 0 ? -box_ : box_;
                db[k] = o * dv[k];
                dc[k] = o * (2.0 * dx[k] + o);
            }
            root = root_from_coeffs(a, b0, c0);
            for (int m = 1; m < (1 << D); ++m) {
                double b = b0, c = c0;
                for (int k = 0; k < D; ++k)
                    if (m & (1 << k)) {
                        b += db[k];
                        c += dc[k];
                    }
                root = std::min(root, root_from_coeffs(a, b, c));
            }
        }
        return root + t0;
    }

#if defined(__AVX2__)
    // Vector scan over partners, four at a time (d = 2 periodic/free). Lanes
    // that hug a wall fall back to the scalar kernel; ties resolve to the
    // lowest index exactly like the scalar scan.
    void scan_best_avx2(int i, int exclude_j, double& best_t, int& best_j) const
        requires(D == 2)
    {
        const int n = static_cast<int>(z_.size());
        const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
        const __m256d zero = _mm256_setzero_pd();
        const __m256d lui = _mm256_set1_pd(slu_[i]);
        const __m256d xi0 = _mm256_set1_pd(sx_[0][i]), xi1 = _mm256_set1_pd(sx_[1][i]);
        const __m256d vi0 = _mm256_set1_pd(sv_[0][i]), vi1 = _mm256_set1_pd(sv_[1][i]);
        const __m256d self = _mm256_set1_pd(static_cast<double>(i));
        const __m256d excl = _mm256_set1_pd(static_cast<double>(exclude_j));
        const __m256d eps2 = _mm256_set1_pd(eps_ * eps_);
        const bool periodic = domain_ == MdDomain::periodic_box;
        const __m256d boxv = _mm256_set1_pd(box_);
        const __m256d nboxv = _mm256_set1_pd(-box_);
        const __m256d edge = _mm256_set1_pd(box_ - eps_);
        const __m256d sign_mask = _mm256_set1_pd(-0.0);

        __m256d best = inf;
        __m256d bestj = _mm256_set1_pd(-1.0);
        __m256d jv = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
        const __m256d four = _mm256_set1_pd(4.0);

        auto root4 = [&](__m256d a, __m256d b, __m256d c) {
            const __m256d disc = _mm256_sub_pd(_mm256_mul_pd(b, b), _mm256_mul_pd(a, c));
            const __m256d sq = _mm256_sqrt_pd(_mm256_max_pd(disc, zero));
            const __m256d t = _mm256_div_pd(_mm256_sub_pd(_mm256_sub_pd(zero, b), sq), a);
            __m256d valid = _mm256_and_pd(_mm256_cmp_pd(b, zero, _CMP_LT_OQ),
                                          _mm256_cmp_pd(disc, zero, _CMP_GT_OQ));
            valid = _mm256_and_pd(valid, _mm256_cmp_pd(c, zero, _CMP_GT_OQ));
            __m256d r = _mm256_blendv_pd(inf, t, valid);
            const __m256d touching = _mm256_and_pd(_mm256_cmp_pd(b, zero, _CMP_LT_OQ),
                                                   _mm256_cmp_pd(c, zero, _CMP_LE_OQ));
            r = _mm256_blendv_pd(r, zero, touching);
            return _mm256_blendv_pd(inf, r, _mm256_cmp_pd(r, zero, _CMP_GE_OQ));
        };

        int j = 0;
        for (; j + 4 <= n; j += 4, jv = _mm256_add_pd(jv, four)) {
            const __m256d luj = _mm256_loadu_pd(slu_.data() + j);
            const __m256d t0 = _mm256_max_pd(luj, lui);
            const __m256d xj0 = _mm256_loadu_pd(sx_[0].data() + j);
            const __m256d xj1 = _mm256_loadu_pd(sx_[1].data() + j);
            const __m256d vj0 = _mm256_loadu_pd(sv_[0].data() + j);
            const __m256d vj1 = _mm256_loadu_pd(sv_[1].data() + j);

            const __m256d dti = _mm256_sub_pd(t0, lui);
            const __m256d dtj = _mm256_sub_pd(t0, luj);
            const __m256d dx0 = _mm256_sub_pd(_mm256_fmadd_pd(dti, vi0, xi0),
                                              _mm256_fmadd_pd(dtj, vj0, xj0));
            const __m256d dx1 = _mm256_sub_pd(_mm256_fmadd_pd(dti, vi1, xi1),
                                              _mm256_fmadd_pd(dtj, vj1, xj1));
            const __m256d dv0 = _mm256_sub_pd(vi0, vj0);
            const __m256d dv1 = _mm256_sub_pd(vi1, vj1);

            const __m256d a = _mm256_fmadd_pd(dv0, dv0, _mm256_mul_pd(dv1, dv1));
            const __m256d b0 = _mm256_fmadd_pd(dx0, dv0, _mm256_mul_pd(dx1, dv1));
            const __m256d c0 =
                _mm256_sub_pd(_mm256_fmadd_pd(dx0, dx0, _mm256_mul_pd(dx1, dx1)), eps2);

            __m256d r;
            if (!periodic) {
                r = root4(a, b0, c0);
            } else {
                const __m256d o0 =
                    _mm256_blendv_pd(boxv, nboxv, _mm256_cmp_pd(dv0, zero, _CMP_GT_OQ));
                const __m256d o1 =
                    _mm256_blendv_pd(boxv, nboxv, _mm256_cmp_pd(dv1, zero, _CMP_GT_OQ));
                const __m256d db0 = _mm256_mul_pd(o0, dv0);
                const __m256d db1 = _mm256_mul_pd(o1, dv1);
                const __m256d dc0 =
                    _mm256_mul_pd(o0, _mm256_fmadd_pd(_mm256_set1_pd(2.0), dx0, o0));
                const __m256d dc1 =
                    _mm256_mul_pd(o1, _mm256_fmadd_pd(_mm256_set1_pd(2.0), dx1, o1));
                r = root4(a, b0, c0);
                r = _mm256_min_pd(r, root4(a, _mm256_add_pd(b0, db0), _mm256_add_pd(c0, dc0)));
                r = _mm256_min_pd(r, root4(a, _mm256_add_pd(b0, db1), _mm256_add_pd(c0, dc1)));
                r = _mm256_min_pd(
                    r, root4(a, _mm256_add_pd(_mm256_add_pd(b0, db0), db1),
                             _mm256_add_pd(_mm256_add_pd(c0, dc0), dc1)));

                const __m256d hug = _mm256_or_pd(
                    _mm256_cmp_pd(_mm256_andnot_pd(sign_mask, dx0), edge, _CMP_GE_OQ),
                    _mm256_cmp_pd(_mm256_andnot_pd(sign_mask, dx1), edge, _CMP_GE_OQ));
                const int hugbits = _mm256_movemask_pd(hug);
                if (hugbits) {
                    alignas(32) double patch[4], t0s[4];
                    _mm256_store_pd(patch, r);
                    _mm256_store_pd(t0s, t0);
                    for (int lane = 0; lane < 4; ++lane)
                        if (hugbits & (1 << lane))
                            patch[lane] = pair_root_abs(i, j + lane) - t0s[lane];
                    r = _mm256_load_pd(patch);
                }
            }
            // zero-velocity pairs and masked indices never produce events
            r = _mm256_blendv_pd(r, inf, _mm256_cmp_pd(a, zero, _CMP_LE_OQ));
            r = _mm256_add_pd(r, t0);
            r = _mm256_blendv_pd(r, inf, _mm256_cmp_pd(jv, self, _CMP_EQ_OQ));
            r = _mm256_blendv_pd(r, inf, _mm256_cmp_pd(jv, excl, _CMP_EQ_OQ));

            const __m256d better = _mm256_cmp_pd(r, best, _CMP_LT_OQ);
            best = _mm256_blendv_pd(best, r, better);
            bestj = _mm256_blendv_pd(bestj, jv, better);
        }

        alignas(32) double bt[4], bj[4];
        _mm256_store_pd(bt, best);
        _mm256_store_pd(bj, bestj);
        best_t = std::numeric_limits<double>::infinity();
        best_j = -1;
        for (int lane = 0; lane < 4; ++lane) {
            if (bt[lane] < best_t ||
                (bt[lane] == best_t && bj[lane] >= 0 && static_cast<int>(bj[lane]) < best_j)) {
                best_t = bt[lane];
                best_j = static_cast<int>(bj[lane]);
            }
        }
        for (; j < n; ++j) {
            if (j == i || j == exclude_j) continue;
            const double t = pair_root_abs(i, j);
            if (t < best_t) {
                best_t = t;
                best_j = j;
            }
        }
        if (!std::isfinite(best_t)) best_j = -1;
    }
#endif

    // Earliest pair root for particle i over all partners: the hot scan.
    void scan_best(int i, int exclude_j, double& best_t, int& best_j) const {
#if defined(__AVX2__)
        if constexpr (D == 2) {
            scan_best_avx2(i, exclude_j, best_t, best_j);
            return;
        }
#endif
        best_t = std::numeric_limits<double>::infinity();
        best_j = -1;
        const int n = static_cast<int>(z_.size());
        for (int j = 0; j < n; ++j) {
            if (j == i || j == exclude_j) continue;
            const double t = pair_root_abs(i, j);
            if (t < best_t) {
                best_t = t;
                best_j = j;
            }
        }
    }

    // Pushes only particle i's earliest event (pair or wall). Stale partners
    // are repaired through the partner_ index after every processed event.
    void schedule_particle(int i, int exclude_j = -1) {
        ++counters_.schedule_calls;
        double best_t;
        int best_j;
        scan_best(i, exclude_j, best_t, best_j);
        int axis = -1;
        const double wall_t = next_wall_time(i, axis);
        if (best_j >= 0 && best_t <= wall_t) {
            queue_.push({best_t, std::min(i, best_j), std::max(i, best_j),
                         EventKind::pair_collision, collisions_[std::min(i, best_j)],
                         collisions_[std::max(i, best_j)]});
            partner_[i] = best_j;
        } else {
            if (axis >= 0)
                queue_.push({wall_t, i, axis, EventKind::wall_wrap, collisions_[i], wraps_[i]});
            partner_[i] = -1;
        }
    }

    // Reschedules every particle whose stored earliest event involved a or b
    // (a, b are particle indices; pass -1 for none).
    void repair_partners(int a, int b) {
        for (int k = 0; k < static_cast<int>(z_.size()); ++k) {
            if (k == a || k == b) continue;
            if ((a >= 0 && partner_[k] == a) || (b >= 0 && partner_[k] == b))
                schedule_particle(k);
        }
    }

    void rebuild_queue() {
        queue_ = {};
        partner_.assign(z_.size(), -1);
        sync_soa_all();
        for (std::size_t i = 0; i < z_.size(); ++i) schedule_particle(static_cast<int>(i));
    }

    void check_overlap() const {
        const double lim = eps_ * (1.0 - 1e-9);
        for (std::size_t i = 0; i < z_.size(); ++i)
            for (std::size_t j = i + 1; j < z_.size(); ++j) {
                Vec<D> d = minimum_image((z_[i].x + (t_ - last_update_[i]) * z_[i].v) -
                                         (z_[j].x + (t_ - last_update_[j]) * z_[j].v));
                if (norm(d) < lim) {
                    std::ostringstream os;
                    os << "hard-sphere overlap: pair (" << i << "," << j << ") at distance "
                       << norm(d) << " < eps=" << eps_ << " at t=" << t_;
                    throw std::runtime_error(os.str());
                }
            }
    }

    PhaseConfiguration<D> z_;
    std::vector<double> last_update_;
    std::array<std::vector<double>, D> sx_, sv_;  // SoA mirrors for the scan
    std::vector<double> slu_;
    std::vector<std::uint64_t> collisions_;
    std::vector<std::uint64_t> wraps_;
    std::vector<int> partner_;
    double eps_;
    MdDomain domain_;
    double box_;
    double t_ = 0;
    double max_event_defect_ = 0;
    double grazing_tol_ = 1e-12;
    double tie_tol_ = 1e-12;
    EventCounters counters_;
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<QueuedEvent>> queue_;
};

}  // namespace kinlab
