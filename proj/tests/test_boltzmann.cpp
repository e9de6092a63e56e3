#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinlab/boltzmann/dsmc.hpp"
#include "kinlab/boltzmann/entropy.hpp"
#include "kinlab/boltzmann/ks_test.hpp"
#include "kinlab/boltzmann/maxwellian.hpp"
#include "kinlab/boltzmann/weak_form.hpp"
#include "kinlab/core/rng.hpp"

using namespace kinlab;

namespace {

template <int D>
VelocityEnsemble<D> maxwell_ensemble(std::size_t n, double theta, Rng& rng) {
    MaxwellianParams<D> mp;
    mp.theta = theta;
    std::vector<Vec<D>> vs(n);
    for (auto& v : vs) v = sample_maxwellian(mp, rng);
    return VelocityEnsemble<D>::uniform_weight(std::move(vs), 1.0);
}

// two-humped mixture: 60% at +u, 40% at -u, distinct temperatures
template <int D>
VelocityEnsemble<D> bimodal_ensemble(std::size_t n, double u, Rng& rng) {
    std::vector<Vec<D>> vs(n);
    MaxwellianParams<D> a, b;
    a.u[0] = u;
    a.theta = 0.4;
    b.u[0] = -u;
    b.theta = 0.9;
    for (auto& v : vs) v = rng.uniform() < 0.6 ? sample_maxwellian(a, rng) : sample_maxwellian(b, rng);
    return VelocityEnsemble<D>::uniform_weight(std::move(vs), 1.0);
}

double bimodal_density(const Vec<2>& v, double u) {
    MaxwellianParams<2> a, b;
    a.u[0] = u;
    a.theta = 0.4;
    b.u[0] = -u;
    b.theta = 0.9;
    return 0.6 * maxwellian_density(a, v) + 0.4 * maxwellian_density(b, v);
}

}  // namespace

TEST_CASE("post_collision_velocities") {
    SUBCASE("omega orthogonal to the relative velocity leaves the pair unchanged") {
        Vec<2> v{1, 0}, v1{-1, 0}, omega{0, 1};
        auto [a, b] = post_collision_velocities(v, v1, omega);
        CHECK(norm(a - v) == 0.0);
        CHECK(norm(b - v1) == 0.0);
    }
    SUBCASE("head-on swap") {
        Vec<2> v{1, 0}, v1{-1, 0}, omega{1, 0};
        auto [a, b] = post_collision_velocities(v, v1, omega);
        CHECK(norm(a - v1) == 0.0);
        CHECK(norm(b - v) == 0.0);
    }
    SUBCASE("involution and conservation on random inputs") {
        Rng rng(4, 4);
        for (int rep = 0; rep < 200; ++rep) {
            const Vec<3> v = rng.normal_vec<3>(), v1 = rng.normal_vec<3>();
            const Vec<3> omega = rng.unit_vector<3>();
            auto [a, b] = post_collision_velocities(v, v1, omega);
            CHECK(norm((a + b) - (v + v1)) < 1e-14);
            CHECK(norm2(a) + norm2(b) == doctest::Approx(norm2(v) + norm2(v1)).epsilon(1e-13));
            auto [c, d] = post_collision_velocities(a, b, omega);
            CHECK(norm(c - v) < 1e-13);
            CHECK(norm(d - v1) < 1e-13);
        }
    }
}

TEST_CASE("maxwellian_density") {
    MaxwellianParams<2> p;
    SUBCASE("peak value at v = u") {
        p.rho = 2.0;
        p.theta = 0.7;
        CHECK(maxwellian_density(p, p.u) ==
              doctest::Approx(2.0 / (2 * PI * 0.7)).epsilon(1e-14));
    }
    SUBCASE("pinned off-peak value in d=2") {
        MaxwellianParams<2> q;  // rho = 1, theta = 1
        CHECK(maxwellian_density(q, Vec<2>{1, 1}) ==
              doctest::Approx(std::exp(-1.0) / (2 * PI)).epsilon(1e-14));
    }
    SUBCASE("integrates to rho (midpoint quadrature oracle)") {
        p.rho = 1.3;
        p.theta = 0.6;
        p.u = Vec<2>{0.2, -0.1};
        double acc = 0;
        const int g = 200;
        const double lo = -6, hi = 6, h = (hi - lo) / g;
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j)
                acc += maxwellian_density(p, Vec<2>{lo + (i + 0.5) * h, lo + (j + 0.5) * h});
        CHECK(acc * h * h == doctest::Approx(1.3).epsilon(1e-6));
    }
}

TEST_CASE("dsmc_step basics") {
    Rng rng(10, 0);
    SUBCASE("single particle never collides") {
        VelocityEnsemble<2> ens = VelocityEnsemble<2>::uniform_weight({Vec<2>{1, 0}}, 1.0);
        const auto st = dsmc_step<2>(ens, 0.5, HardSphereKernel{}, rng);
        CHECK(st.collisions == 0);
        CHECK(ens.t == doctest::Approx(0.5));
    }
    SUBCASE("conservation is exact per step") {
        auto ens = maxwell_ensemble<2>(20000, 1.0, rng);
        const Vec<2> p0 = ens.momentum_density();
        const double e0 = ens.energy_density();
        for (int s = 0; s < 20; ++s) dsmc_step<2>(ens, 0.05, HardSphereKernel{}, rng);
        CHECK(norm(ens.momentum_density() - p0) < 1e-12);
        CHECK(std::abs(ens.energy_density() - e0) / e0 < 1e-12);
    }
    SUBCASE("collision count matches the kinetic rate") {
        const double theta = 1.0;
        auto ens = maxwell_ensemble<2>(40000, theta, rng);
        std::uint64_t total = 0;
        const double dt = 0.02;
        const int steps = 25;
        for (int s = 0; s < steps; ++s) total += dsmc_step<2>(ens, dt, HardSphereKernel{}, rng).collisions;
        // per-particle rate = rho <int b domega> = 2 <|w|> = 2 sqrt(pi theta)
        const double expected = 0.5 * ens.v.size() * 2.0 * std::sqrt(PI * theta) * dt * steps;
        CHECK(std::abs(static_cast<double>(total) - expected) < 5 * std::sqrt(expected));
    }
}

TEST_CASE("dsmc preserves Maxwellian moments and relaxes a bimodal ensemble") {
    Rng rng(11, 1);
    SUBCASE("Maxwellian moments stable over 100 steps (3 sigma)") {
        const std::size_t n = 50000;
        auto ens = maxwell_ensemble<2>(n, 1.0, rng);
        // moment oracles for the centered Maxwellian: <v_k>=0, <|v|^2>=2 theta,
        // <|v|^4>=8 theta^2 in d=2
        for (int s = 0; s < 100; ++s) dsmc_step<2>(ens, 0.02, HardSphereKernel{}, rng);
        double m1 = 0, m2 = 0, m4 = 0;
        for (const auto& v : ens.v) {
            m1 += v[0];
            m2 += norm2(v);
            m4 += norm2(v) * norm2(v);
        }
        m1 /= n;
        m2 /= n;
        m4 /= n;
        CHECK(std::abs(m1) < 3.0 * std::sqrt(1.0 / n));
        CHECK(std::abs(m2 - 2.0) < 3.0 * std::sqrt(8.0 / n));
        CHECK(std::abs(m4 - 8.0) < 3.0 * std::sqrt(384.0 / n) * 1.5);
    }
    SUBCASE("bimodal d=3: temperature exactly conserved, fourth moment relaxes") {
        const std::size_t n = 30000;
        auto ens = bimodal_ensemble<3>(n, 1.2, rng);
        const double theta0 = ens.temperature();
        const double m4_0 = ens.fourth_moment();
        for (int s = 0; s < 120; ++s) dsmc_step<3>(ens, 0.02, HardSphereKernel{}, rng);
        const double theta1 = ens.temperature();
        CHECK(theta1 == doctest::Approx(theta0).epsilon(1e-12));
        // Gaussian limit in d=3: <|v|^4> = 15 theta^2 around the bulk velocity;
        // recentre by the conserved mean
        Vec<3> u{};
        for (const auto& v : ens.v) u += v;
        u *= 1.0 / n;
        double m4 = 0;
        for (const auto& v : ens.v) m4 += norm2(v - u) * norm2(v - u);
        m4 /= n;
        const double gauss = 15.0 * theta1 * theta1;
        CHECK(std::abs(m4 - gauss) < std::abs(m4_0 - gauss) * 0.2);
    }
}

TEST_CASE("entropy estimator") {
    Rng rng(12, 2);
    SUBCASE("Maxwellian sample matches the Gaussian closed form") {
        const double theta = 0.8;
        auto ens = maxwell_ensemble<2>(300000, theta, rng);
        const auto est = entropy<2>(ens, {-6.0, 6.0, 60});
        const double ref = gaussian_entropy_reference(theta, 2);
        // histogram discretization bias is second order in the cell width
        CHECK(std::abs(est.H - ref) < 0.01);
    }
    SUBCASE("point mass gives log of inverse cell volume") {
        VelocityEnsemble<2> ens = VelocityEnsemble<2>::uniform_weight(
            std::vector<Vec<2>>(1000, Vec<2>{0.05, 0.05}), 1.0);
        const auto est = entropy<2>(ens, {-1.0, 1.0, 10});
        CHECK(est.occupied_bins == 1);
        CHECK(est.H == doctest::Approx(std::log(1.0 / (0.2 * 0.2))).epsilon(1e-12));
    }
    SUBCASE("H decreases along DSMC relaxation up to noise") {
        auto ens = bimodal_ensemble<2>(100000, 1.5, rng);
        std::vector<double> hs, sigmas;
        for (int s = 0; s < 8; ++s) {
            const auto est = entropy<2>(ens, {-6.0, 6.0, 48});
            hs.push_back(est.H);
            sigmas.push_back(est.sigma);
            for (int k = 0; k < 12; ++k) dsmc_step<2>(ens, 0.05, HardSphereKernel{}, rng);
        }
        for (std::size_t s = 1; s < hs.size(); ++s)
            CHECK(hs[s] <= hs[s - 1] + 2.0 * (sigmas[s] + sigmas[s - 1]));
        // and a genuine net decrease happened
        CHECK(hs.back() < hs.front() - 0.05);
    }
    SUBCASE("empty ensemble rejected") {
        VelocityEnsemble<2> ens;
        CHECK_THROWS_AS(entropy<2>(ens, {-1.0, 1.0, 4}), std::invalid_argument);
    }
}

TEST_CASE("collision_operator_weak") {
    Rng rng(13, 3);
    const std::size_t n = 60000;

    SUBCASE("collision invariants vanish within 3 sigma") {
        auto ens = bimodal_ensemble<2>(n, 1.0, rng);
        const std::size_t samples = 400000;
        auto phi1 = [](const Vec<2>&) { return 1.0; };
        auto phivx = [](const Vec<2>& v) { return v[0]; };
        auto phivy = [](const Vec<2>& v) { return v[1]; };
        auto phie = [](const Vec<2>& v) { return norm2(v); };
        for (auto phi : std::vector<std::function<double(const Vec<2>&)>>{phi1, phivx, phivy, phie}) {
            const auto est = collision_operator_weak<2>(ens, phi, HardSphereKernel{}, samples, rng);
            CHECK(std::abs(est.value) <= std::max(est.ci(3.0), 1e-12));
        }
    }

    SUBCASE("odd cubic moment matches a deterministic grid quadrature") {
        const double u = 1.0;
        auto ens = bimodal_ensemble<2>(n, u, rng);
        auto phi = [](const Vec<2>& v) { return v[0] * v[0] * v[0]; };
        const auto est = collision_operator_weak<2>(ens, phi, HardSphereKernel{}, 2000000, rng);

        // oracle: direct Riemann sum of  int f f1 b (phi(v') - phi(v))
        // over (v, v1, omega) with the closed-form mixture density
        const int g = 28, ga = 24;
        const double lo = -4.5, hi = 4.5, h = (hi - lo) / g;
        double acc = 0;
        for (int i = 0; i < g; ++i)
            for (int j = 0; j < g; ++j) {
                const Vec<2> v{lo + (i + 0.5) * h, lo + (j + 0.5) * h};
                const double fv = bimodal_density(v, u);
                if (fv < 1e-9) continue;
                for (int i1 = 0; i1 < g; ++i1)
                    for (int j1 = 0; j1 < g; ++j1) {
                        const Vec<2> v1{lo + (i1 + 0.5) * h, lo + (j1 + 0.5) * h};
                        const double fv1 = bimodal_density(v1, u);
                        if (fv1 < 1e-9) continue;
                        for (int a = 0; a < ga; ++a) {
                            const double ang = 2 * PI * (a + 0.5) / ga;
                            const Vec<2> omega{std::cos(ang), std::sin(ang)};
                            const double b = std::max(dot(omega, v - v1), 0.0);
                            if (b == 0) continue;
                            const auto [vp, v1p] = post_collision_velocities(v, v1, omega);
                            acc += fv * fv1 * b * (phi(vp) - phi(v));
                        }
                    }
            }
        const double oracle = acc * h * h * h * h * (2 * PI / ga);

        CHECK(std::abs(oracle) > 0.05);  // genuinely nonzero signal
        // combined error: MC CI + ensemble fluctuation + grid bias allowance
        const double tol = est.ci(3.0) + 4.0 * std::abs(oracle) / std::sqrt(double(n)) +
                           0.05 * std::abs(oracle);
        CHECK(std::abs(est.value - oracle) < tol);
    }
}

TEST_CASE("existence_horizon") {
    const double T = existence_horizon(1.0, 1.0, 2);
    CHECK(T > 0);
    CHECK(existence_horizon(2.0, 1.0, 2) == doctest::Approx(T / 2).epsilon(1e-12));
    CHECK(existence_horizon(1e12, 1.0, 2) < 1e-9);
    CHECK_THROWS_AS(existence_horizon(0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("dsmc stationary speed law passes KS against the Maxwellian") {
    Rng rng(14, 4);
    const std::size_t n = 40000;
    auto ens = bimodal_ensemble<2>(n, 1.0, rng);
    // exact temperature from conservation (around the conserved mean)
    Vec<2> u{};
    for (const auto& v : ens.v) u += v;
    u *= 1.0 / n;
    double theta = 0;
    for (const auto& v : ens.v) theta += norm2(v - u);
    theta /= (2.0 * n);

    for (int s = 0; s < 300; ++s) dsmc_step<2>(ens, 0.05, HardSphereKernel{}, rng);

    std::vector<double> speeds;
    speeds.reserve(n);
    for (const auto& v : ens.v) speeds.push_back(norm(v - u));
    const auto ks = ks_test(speeds, [&](double s) { return maxwell_speed_cdf(s, theta, 2); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("table kernel drives DSMC with majorant rejection") {
    Rng rng(15, 5);
    const PotentialSpec barrier = potentials::exp_barrier();
    std::vector<double> E0s{0.25, 1.0, 4.0, 16.0, 64.0};
    std::vector<double> thetas;
    for (int i = 1; i <= 16; ++i) thetas.push_back(i * (0.5 * PI) / 18.0);
    const CrossSectionTable tab = build_cross_section_table(barrier, 2, E0s, thetas);

    auto ens = bimodal_ensemble<2>(20000, 1.0, rng);
    const Vec<2> p0 = ens.momentum_density();
    const double e0 = ens.energy_density();
    DsmcKernel<2> kernel = &tab;
    std::uint64_t colls = 0;
    for (int s = 0; s < 30; ++s) colls += dsmc_step<2>(ens, 0.05, kernel, rng).collisions;
    CHECK(colls > 1000);
    CHECK(norm(ens.momentum_density() - p0) < 1e-12);
    CHECK(std::abs(ens.energy_density() - e0) / e0 < 1e-12);
}
