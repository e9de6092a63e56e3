#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinlab/boltzmann/maxwellian.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/md/hard_sphere.hpp"
#include "kinlab/md/marginal.hpp"

using namespace kinlab;

namespace {

// non-overlapping uniform positions in a periodic box with Maxwellian velocities
template <int D>
PhaseConfiguration<D> gas_in_box(std::size_t N, double eps, double L, double theta, Rng& rng) {
    PhaseConfiguration<D> Z;
    MaxwellianParams<D> mp;
    mp.theta = theta;
    while (Z.size() < N) {
        Vec<D> x;
        for (int k = 0; k < D; ++k) x[k] = rng.uniform() * L;
        bool ok = true;
        for (const auto& z : Z) {
            Vec<D> d = z.x - x;
            for (int k = 0; k < D; ++k) d[k] -= L * std::round(d[k] / L);
            if (norm(d) < 1.2 * eps) {
                ok = false;
                break;
            }
        }
        if (ok) Z.push_back({x, sample_maxwellian(mp, rng)});
    }
    return Z;
}

}  // namespace

TEST_CASE("predict_pair_collision closed forms") {
    // gap of 2 closing at relative speed 2
    PhasePoint<2> a{Vec<2>{0, 0}, Vec<2>{1, 0}};
    PhasePoint<2> b{Vec<2>{3, 0}, Vec<2>{-1, 0}};
    auto t = predict_pair_collision<2>(a, b, 1.0);
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(1.0).epsilon(1e-14));

    // equal velocities never collide
    PhasePoint<2> c{Vec<2>{0, 0}, Vec<2>{1, 1}};
    PhasePoint<2> d{Vec<2>{3, 0}, Vec<2>{1, 1}};
    CHECK_FALSE(predict_pair_collision<2>(c, d, 1.0).has_value());

    // receding pair
    PhasePoint<2> e{Vec<2>{0, 0}, Vec<2>{-1, 0}};
    PhasePoint<2> f{Vec<2>{3, 0}, Vec<2>{1, 0}};
    CHECK_FALSE(predict_pair_collision<2>(e, f, 1.0).has_value());
}

TEST_CASE("predict_pair_collision against a dense time-stepping oracle") {
    Rng rng(31, 0);
    const double eps = 0.2;
    int checked = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        PhasePoint<2> a{rng.normal_vec<2>(), rng.normal_vec<2>()};
        PhasePoint<2> b{rng.normal_vec<2>(), rng.normal_vec<2>()};
        if (norm(a.x - b.x) < eps) continue;
        const auto t = predict_pair_collision<2>(a, b, eps);
        // brute-force stepping oracle: coarse scan for the first crossing,
        // then dense dt = 1e-6 stepping across the bracketing window
        const double horizon = 5.0;
        double t_oracle = -1;
        double bracket = -1;
        for (double s = 0; s < horizon; s += 1e-3) {
            if (norm((a.x + s * a.v) - (b.x + s * b.v)) <= eps) {
                bracket = s;
                break;
            }
        }
        if (bracket >= 0) {
            for (double s = std::max(0.0, bracket - 1e-3); s <= bracket; s += 1e-6) {
                if (norm((a.x + s * a.v) - (b.x + s * b.v)) <= eps) {
                    t_oracle = s;
                    break;
                }
            }
        }
        if (t.has_value() && *t < horizon) {
            REQUIRE_MESSAGE(t_oracle >= 0, "oracle missed a predicted collision");
            CHECK(std::abs(*t - t_oracle) < 1e-5);
            ++checked;
        } else {
            CHECK(t_oracle < 0);
        }
    }
    CHECK(checked > 40);  // enough colliding pairs sampled
}

TEST_CASE("reflect") {
    SUBCASE("head-on swap") {
        Vec<2> vi{1, 0}, vj{-1, 0};
        CHECK(reflect(vi, vj, Vec<2>{1, 0}) == ReflectStatus::ok);
        CHECK(norm(vi - Vec<2>{-1, 0}) == 0.0);
        CHECK(norm(vj - Vec<2>{1, 0}) == 0.0);
    }
    SUBCASE("normal orthogonal to the relative velocity signals grazing") {
        Vec<2> vi{0, 1}, vj{0, -1};
        CHECK(reflect(vi, vj, Vec<2>{1, 0}) == ReflectStatus::grazing);
        CHECK(norm(vi - Vec<2>{0, 1}) == 0.0);  // untouched
    }
    SUBCASE("random triples conserve momentum and energy to 1e-14") {
        Rng rng(5, 5);
        for (int rep = 0; rep < 500; ++rep) {
            Vec<3> vi = rng.normal_vec<3>(), vj = rng.normal_vec<3>();
            const Vec<3> nu = rng.unit_vector<3>();
            const Vec<3> p0 = vi + vj;
            const double e0 = norm2(vi) + norm2(vj);
            if (reflect(vi, vj, nu) != ReflectStatus::ok) continue;
            CHECK(norm((vi + vj) - p0) <= 1e-14 * (1 + norm(p0)));
            CHECK(std::abs(norm2(vi) + norm2(vj) - e0) <= 1e-13 * (1 + e0));
            // involution: reflecting again with the same normal restores
            Vec<3> wi = vi, wj = vj;
            reflect(wi, wj, nu);
            CHECK(norm(wi - (vi + dot(nu, vj - vi) * nu)) < 1e-14);  // definition re-check
        }
    }
    SUBCASE("non-unit normal is rejected") {
        Vec<2> vi{1, 0}, vj{0, 0};
        CHECK_THROWS_AS(reflect(vi, vj, Vec<2>{1, 1}), std::invalid_argument);
    }
}

TEST_CASE("run_to: two-particle head-on pair collides exactly once") {
    PhaseConfiguration<2> Z{{Vec<2>{-1, 0}, Vec<2>{1, 0}}, {Vec<2>{1, 0}, Vec<2>{-1, 0}}};
    MdState<2> md(Z, 0.25);
    md.run_to(10.0);
    CHECK(md.counters().pair_collision == 1);
    CHECK(md.counters().pathological_grazing == 0);
    // after the swap the particles recede forever
    const auto out = md.config();
    CHECK(dot(out[0].x - out[1].x, out[0].v - out[1].v) > 0);
}

TEST_CASE("run_to: empty and single-particle systems free-stream") {
    MdState<2> empty(PhaseConfiguration<2>{}, 0.1);
    empty.run_to(5.0);
    CHECK(empty.counters().pair_collision == 0);

    MdState<2> one(PhaseConfiguration<2>{{Vec<2>{0, 0}, Vec<2>{2, 1}}}, 0.1);
    one.run_to(3.0);
    CHECK(one.counters().pair_collision == 0);
    CHECK(norm(one.config()[0].x - Vec<2>{6, 3}) < 1e-12);
}

TEST_CASE("periodic box: conservation and event-distance accuracy over many events") {
    Rng rng(77, 0);
    const std::size_t N = 50;
    const double L = 1.0, eps = 0.02;
    auto Z = gas_in_box<2>(N, eps, L, 1.0, rng);
    MdState<2> md(Z, eps, MdDomain::periodic_box, L);

    const Vec<2> p0 = md.total_momentum();
    const double e0 = md.kinetic_energy();
    while (md.counters().pair_collision < 100000) md.run_to(md.t() + 5.0);

    CHECK(norm(md.total_momentum() - p0) / (1 + norm(p0)) < 1e-11);
    CHECK(std::abs(md.kinetic_energy() - e0) / e0 < 1e-11);
    CHECK(md.max_event_distance_defect() < 1e-10);
    CHECK(md.counters().pathological_grazing < 10);
}

TEST_CASE("deterministic replay: identical inputs give bit-identical results") {
    Rng rng(123, 9);
    auto Z = gas_in_box<2>(20, 0.05, 1.0, 1.0, rng);
    MdState<2> a(Z, 0.05, MdDomain::periodic_box, 1.0);
    MdState<2> b(Z, 0.05, MdDomain::periodic_box, 1.0);
    a.run_to(20.0);
    b.run_to(20.0);
    CHECK(a.counters().pair_collision == b.counters().pair_collision);
    CHECK(a.counters().wall_wrap == b.counters().wall_wrap);
    const auto ca = a.config(), cb = b.config();
    for (std::size_t i = 0; i < ca.size(); ++i) {
        CHECK(ca[i].x == cb[i].x);
        CHECK(ca[i].v == cb[i].v);
    }
}

TEST_CASE("reversibility") {
    SUBCASE("zero velocities: error 0") {
        PhaseConfiguration<2> Z{{Vec<2>{0, 0}, Vec<2>{}}, {Vec<2>{1, 0}, Vec<2>{}}};
        MdState<2> md(Z, 0.1);
        CHECK(md.reversibility_check(1.0) == 0.0);
    }
    SUBCASE("one collision, two particles: error < 1e-10") {
        PhaseConfiguration<2> Z{{Vec<2>{-1, 0.05}, Vec<2>{1, 0}}, {Vec<2>{1, -0.05}, Vec<2>{-1, 0}}};
        MdState<2> md(Z, 0.25);
        CHECK(md.reversibility_check(3.0) < 1e-10);
    }
    SUBCASE("N=20 over tens of events: error below the configured threshold") {
        // chaotic amplification per collision is ~ (mean free path)/eps, so
        // double precision affords a few collisions per particle before the
        // reversal defect saturates; the horizon keeps the run inside that
        // budget (threshold configurable by design)
        Rng rng(15, 2);
        auto Z = gas_in_box<2>(20, 0.04, 1.0, 1.0, rng);
        MdState<2> md(Z, 0.04, MdDomain::periodic_box, 1.0);
        const double err = md.reversibility_check(0.9);
        CHECK(md.counters().pair_collision > 30);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("three-dimensional dynamics: conservation in free space and periodic box") {
    Rng rng(55, 3);
    MaxwellianParams<3> mp;

    SUBCASE("free-space pair collides head-on like the 2d case") {
        PhaseConfiguration<3> Z{{Vec<3>{-1, 0, 0}, Vec<3>{1, 0, 0}},
                                {Vec<3>{1, 0, 0}, Vec<3>{-1, 0, 0}}};
        MdState<3> md(Z, 0.25);
        md.run_to(5.0);
        CHECK(md.counters().pair_collision == 1);
    }

    SUBCASE("periodic box run conserves and keeps exact event distances") {
        const double L = 1.0, eps = 0.06;
        PhaseConfiguration<3> Z;
        while (Z.size() < 40) {
            Vec<3> x{rng.uniform() * L, rng.uniform() * L, rng.uniform() * L};
            bool ok = true;
            for (const auto& z : Z) {
                Vec<3> d = z.x - x;
                for (int k = 0; k < 3; ++k) d[k] -= L * std::round(d[k] / L);
                if (norm(d) < 1.2 * eps) {
                    ok = false;
                    break;
                }
            }
            if (ok) Z.push_back({x, sample_maxwellian(mp, rng)});
        }
        MdState<3> md(Z, eps, MdDomain::periodic_box, L);
        const Vec<3> p0 = md.total_momentum();
        const double e0 = md.kinetic_energy();
        while (md.counters().pair_collision < 20000) md.run_to(md.t() + 2.0);
        CHECK(norm(md.total_momentum() - p0) / (1 + norm(p0)) < 1e-11);
        CHECK(std::abs(md.kinetic_energy() - e0) / e0 < 1e-11);
        CHECK(md.max_event_distance_defect() < 1e-10);
        CHECK(md.counters().wall_wrap > 100);
    }
}

TEST_CASE("pathological fraction decreases with the tie tolerance") {
    Rng rng(99, 1);
    auto count_with_tol = [&](double tol) {
        Rng local(99, 1);
        auto Z = gas_in_box<2>(40, 0.03, 1.0, 1.0, local);
        MdState<2> md(Z, 0.03, MdDomain::periodic_box, 1.0);
        md.set_tie_tol(tol);
        md.run_to(50.0);
        return static_cast<double>(md.counters().pathological_triple) /
               static_cast<double>(md.counters().pair_collision + 1);
    };
    const double loose = count_with_tol(1e-3);
    const double tight = count_with_tol(1e-12);
    CHECK(tight <= loose);
}

TEST_CASE("empirical_marginal") {
    SUBCASE("point mass lands in a single cell") {
        PhaseConfiguration<2> Z;
        for (int i = 0; i < 30; ++i) Z.push_back({Vec<2>{0.1 * i, 0}, Vec<2>{0.5, -0.25}});
        const Histogram h = empirical_marginal<2>({Z}, 1, {2.0, 8});
        std::size_t occupied = 0;
        for (std::size_t i = 0; i < h.size(); ++i) occupied += h.counts()[i] > 0;
        CHECK(occupied == 1);
        // integrates to 1: sum of p equals one
        double mass = 0;
        for (std::size_t i = 0; i < h.size(); ++i) mass += h.p(i);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("normalization holds even when some velocities leave the box") {
        PhaseConfiguration<2> Z;
        for (int i = 0; i < 50; ++i)
            Z.push_back({Vec<2>{0, 0}, Vec<2>{i < 10 ? 9.0 : 0.1, 0.0}});  // 10 outliers
        const Histogram h = empirical_marginal<2>({Z}, 1, {2.0, 8});
        CHECK(h.out_of_range_weight() == doctest::Approx(10.0));
        double mass = 0;
        for (std::size_t i = 0; i < h.size(); ++i) mass += h.p(i);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("Maxwellian sample matches the density within multinomial error") {
        Rng rng(7, 7);
        MaxwellianParams<2> mp;  // theta = 1
        std::vector<PhaseConfiguration<2>> snaps(1);
        for (int i = 0; i < 200000; ++i)
            snaps[0].push_back({Vec<2>{}, sample_maxwellian(mp, rng)});
        const MarginalSpec spec{4.0, 16};
        const Histogram h = empirical_marginal<2>(snaps, 1, spec);
        const double n = h.total_weight() - h.out_of_range_weight();
        int outliers = 0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            Vec<2> v{h.center(i, 0), h.center(i, 1)};
            const double p_th = maxwellian_density(mp, v) * h.cell_volume();
            if (p_th * n < 20) continue;  // skip cells with tiny expectation
            const double sigma = std::sqrt(p_th * (1 - p_th) / n);
            if (std::abs(h.p(i) - p_th) > 4 * sigma) ++outliers;
        }
        // 4-sigma multinomial outliers should be rare among ~200 tested cells
        CHECK(outliers <= 3);
    }

    SUBCASE("order-2 marginal of a product ensemble factorizes") {
        Rng rng(8, 8);
        MaxwellianParams<2> mp;
        std::vector<PhaseConfiguration<2>> snaps(1);
        for (int i = 0; i < 4000; ++i)
            snaps[0].push_back({Vec<2>{}, sample_maxwellian(mp, rng)});
        const MarginalSpec spec{3.0, 6};
        const Histogram h2 = empirical_marginal<2>(snaps, 2, spec);
        const Histogram h1 = empirical_marginal<2>(snaps, 1, spec);
        // compare h2 cells against the product of h1 cells within multinomial CI
        const double n2 = h2.total_weight();
        int outliers = 0, tested = 0;
        const std::size_t b = 6;
        for (std::size_t i = 0; i < h1.size(); ++i)
            for (std::size_t j = 0; j < h1.size(); ++j) {
                const double p_prod = h1.p(i) * h1.p(j);
                if (p_prod * n2 < 25) continue;
                const std::size_t flat = i * b * b + j;  // [v1 axes][v2 axes] row-major
                const double sigma = std::sqrt(p_prod * (1 - p_prod) / n2) + 1e-12;
                ++tested;
                if (std::abs(h2.p(flat) - p_prod) > 5 * sigma) ++outliers;
            }
        CHECK(tested > 20);
        CHECK(outliers <= tested / 10);
    }

    SUBCASE("input validation") {
        CHECK_THROWS_AS(empirical_marginal<2>({}, 1, {1.0, 4}), std::invalid_argument);
        PhaseConfiguration<2> Z{{Vec<2>{}, Vec<2>{}}};
        CHECK_THROWS_AS(empirical_marginal<2>({Z}, 3, {1.0, 4}), std::invalid_argument);
    }
}
