#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinlab/core/potential.hpp"
#include "kinlab/core/rng.hpp"
#include "kinlab/scattering/scattering.hpp"

using namespace kinlab;

namespace {

// reduced initial data in the plane with prescribed (E0, J0)
struct ReducedIc {
    Vec<2> dy0, dw0;
};
ReducedIc make_ic(double E0, double J0) {
    const double w = std::sqrt(E0);
    return {Vec<2>{1.0, 0.0}, Vec<2>{-w * std::sqrt(1.0 - J0 * J0), w * J0}};
}

const PotentialSpec kBarrier = potentials::exp_barrier();
const PotentialSpec kCap = potentials::quadratic_cap();

}  // namespace

TEST_CASE("psi closed-form values") {
    const ReducedInputs in{3.0, 0.5};
    // rho = 1: barrier vanishes, Psi = E0 J0^2
    CHECK(psi(1.0, in, kBarrier) == doctest::Approx(3.0 * 0.25).epsilon(1e-14));
    // J0 = 0: pure barrier
    CHECK(psi(0.3, ReducedInputs{7.0, 0.0}, kBarrier) ==
          doctest::Approx(4.0 * kBarrier.phi(0.3)).epsilon(1e-14));
    // random inputs against a direct re-evaluation
    Rng rng(2, 0);
    for (int i = 0; i < 50; ++i) {
        const double rho = 0.05 + 0.9 * rng.uniform();
        const double E0 = 0.1 + 10 * rng.uniform(), J0 = rng.uniform();
        CHECK(psi(rho, ReducedInputs{E0, J0}, kBarrier) ==
              doctest::Approx(E0 * J0 * J0 / (rho * rho) + 4 * kBarrier.phi(rho)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(psi(0.0, in, kBarrier), std::invalid_argument);
}

TEST_CASE("rho_star boundary cases and defining equation") {
    // J0 = 1: Psi(1) = E0 exactly
    CHECK(rho_star(ReducedInputs{2.0, 1.0}, kBarrier) == 1.0);

    // J0 = 0: head-on turning point is the potential inverse of E0/4
    for (double E0 : {0.5, 2.0, 8.0}) {
        const double r = rho_star(ReducedInputs{E0, 0.0}, kBarrier);
        CHECK(r == doctest::Approx(kBarrier.inverse(E0 / 4.0)).epsilon(1e-9));
    }

    // defining equation Psi(rho*) = E0 at 1e-10 relative
    Rng rng(3, 1);
    for (int i = 0; i < 40; ++i) {
        const ReducedInputs in{0.1 + 20 * rng.uniform(), 0.97 * rng.uniform()};
        const double r = rho_star(in, kBarrier);
        CHECK(psi(r, in, kBarrier) == doctest::Approx(in.E0).epsilon(1e-10));
    }

    // bounded potential, head-on, energy above the cap: no turning point
    CHECK_THROWS_AS(rho_star(ReducedInputs{6.0, 0.0}, kCap), std::runtime_error);
}

TEST_CASE("reduced ODE oracle: free flight and head-on reflection") {
    PotentialSpec zero;
    zero.label = "zero";
    zero.bounded_at_zero = true;
    zero.phi = [](double) { return 0.0; };
    zero.dphi = [](double) { return 0.0; };
    zero.ddphi = [](double) { return 0.0; };

    SUBCASE("zero potential: straight line, exit velocity = entry velocity") {
        const ReducedIc ic = make_ic(2.0, 0.6);
        const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, zero, 1e-3);
        CHECK(norm(tr.dw_exit - ic.dw0) < 1e-12);
        CHECK(norm(tr.dy_exit) == doctest::Approx(1.0).epsilon(1e-12));
        // chord length of the straight line through the unit disk
        const double chord = 2.0 * std::sqrt(1.0 - 0.36);
        CHECK(tr.tau_exit == doctest::Approx(chord / norm(ic.dw0)).epsilon(1e-9));
    }

    SUBCASE("head-on encounter reflects the relative velocity") {
        const ReducedIc ic = make_ic(4.0, 0.0);
        const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, kBarrier, 1e-3);
        CHECK(norm(tr.dw_exit + ic.dw0) < 1e-7);
        CHECK(tr.energy_drift < 1e-9);
    }

    SUBCASE("energy conservation over a generic encounter") {
        const ReducedIc ic = make_ic(3.0, 0.45);
        const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, kBarrier, 1e-3);
        CHECK(tr.energy_drift < 1e-9);
        // exits post-collisionally on the unit sphere
        CHECK(norm(tr.dy_exit) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(dot(tr.dy_exit, tr.dw_exit) > 0);
    }

    SUBCASE("pre-collisional precondition is enforced") {
        CHECK_THROWS_AS(integrate_reduced_ode<2>(Vec<2>{1, 0}, Vec<2>{1, 0}, kBarrier, 1e-3),
                        std::invalid_argument);
    }
}

TEST_CASE("quadrature vs ODE oracle: rho*, tau*, Theta at (E0=4, J0=0.5)") {
    const ReducedInputs in{4.0, 0.5};
    const ReducedIc ic = make_ic(in.E0, in.J0);
    const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, kBarrier, 5e-4);

    const double rs = rho_star(in, kBarrier);
    CHECK(rs == doctest::Approx(tr.rho_min).epsilon(1e-6));

    const double ts = tau_star(in, kBarrier);
    CHECK(ts == doctest::Approx(tr.tau_exit).epsilon(1e-6));

    const ScatteringSolution sol = deflection(in, kBarrier);
    const double theta_ode = theta_from_ode<2>(ic.dw0, tr.dw_exit);
    CHECK(sol.Theta == doctest::Approx(theta_ode).epsilon(1e-6));
}

TEST_CASE("deflection endpoints") {
    for (double E0 : {0.2, 1.0, 30.0}) {
        CHECK(deflection(ReducedInputs{E0, 0.0}, kBarrier).Theta == 0.0);
        CHECK(deflection(ReducedInputs{E0, 1.0}, kBarrier).Theta ==
              doctest::Approx(0.5 * PI).epsilon(1e-12));
    }
}

TEST_CASE("tau_star vanishes as J0 -> 1 and respects the paper bound branch") {
    CHECK(tau_star(ReducedInputs{2.0, 1.0}, kBarrier) == 0.0);
    CHECK(tau_star(ReducedInputs{2.0, 1.0 - 1e-9}, kBarrier) < 1e-3);

    // branch bound: tau* <= 16 / (sqrt(E0) (phi^{-1}(E0/4))^2) when J0 >= i0
    for (double E0 : {0.5, 2.0, 10.0}) {
        const double inv = kBarrier.inverse(E0 / 4.0);
        const double i0 = inv / (2.0 * std::sqrt(2.0));
        for (double J0 : {0.3, 0.6, 0.9}) {
            if (J0 < i0) continue;
            const double bound = 16.0 / (std::sqrt(E0) * inv * inv);
            CHECK(tau_star(ReducedInputs{E0, J0}, kBarrier) <= bound * (1 + 1e-9));
        }
    }
}

TEST_CASE("quadrature vs ODE across a coarse (E0, J0) grid") {
    // the full 20x20 acceptance grid runs in the acceptance suite; this is a
    // fast slice covering the corners and the center
    for (double E0 : {0.1, 4.0, 100.0}) {
        for (double J0 : {0.05, 0.5, 0.95}) {
            const ReducedIc ic = make_ic(E0, J0);
            const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, kBarrier, 2e-4);
            const ScatteringSolution sol = deflection(ReducedInputs{E0, J0}, kBarrier);
            const double theta_ode = theta_from_ode<2>(ic.dw0, tr.dw_exit);
            CHECK(std::abs(sol.Theta - theta_ode) < 1e-6);
            CHECK(std::abs(sol.tau_star - tr.tau_exit) / tr.tau_exit < 1e-6);
        }
    }
}

TEST_CASE("Theta strictly increasing in J0 for the barrier potential") {
    for (double E0 : {0.1, 1.0, 100.0}) {
        double prev = 0.0;
        for (int i = 1; i <= 30; ++i) {
            const double J0 = 0.02 + 0.95 * (i - 1) / 30.0;
            const double th = deflection(ReducedInputs{E0, J0}, kBarrier).Theta;
            CHECK(th > prev);
            prev = th;
        }
    }
}

TEST_CASE("invert_deflection") {
    SUBCASE("endpoints") {
        CHECK(invert_deflection(1.0, 0.0, kBarrier) == 0.0);
        CHECK(invert_deflection(1.0, 0.5 * PI, kBarrier) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("round trip J0 -> Theta -> J0 on a grid") {
        for (double E0 : {0.3, 2.0, 20.0}) {
            for (double J0 : {0.1, 0.35, 0.6, 0.85}) {
                const double th = deflection(ReducedInputs{E0, J0}, kBarrier).Theta;
                CHECK(invert_deflection(E0, th, kBarrier) == doctest::Approx(J0).epsilon(1e-8));
            }
        }
    }
    SUBCASE("non-monotone potential triggers the error path") {
        CHECK_THROWS_AS(invert_deflection(6.0, 1.2, kCap), NonMonotoneDeflection);
    }
    SUBCASE("hard-sphere closed form") {
        CHECK(invert_deflection(3.0, 0.7, potentials::hard_sphere(),
                                InteractionKind::hard_sphere) ==
              doctest::Approx(std::sin(0.7)).epsilon(1e-14));
    }
}

TEST_CASE("cross_section") {
    SUBCASE("hard-sphere machinery reproduces b = |w| cos(Theta)") {
        for (int d : {2, 3}) {
            for (double th = 0.05; th < 1.55; th += 0.1) {
                const auto b = cross_section(2.0, th, potentials::hard_sphere(), d,
                                             InteractionKind::hard_sphere);
                CHECK(b.b == doctest::Approx(2.0 * std::cos(th)).epsilon(1e-8));
            }
        }
    }
    SUBCASE("zero relative speed gives zero") {
        CHECK(cross_section(0.0, 0.7, kBarrier, 3).b == 0.0);
    }
    SUBCASE("barrier potential against the reciprocal-derivative oracle (d=3)") {
        for (double E0 : {1.0, 9.0}) {
            const double w = std::sqrt(E0);
            for (double J0 : {0.25, 0.5, 0.8}) {
                const double th = deflection(ReducedInputs{E0, J0}, kBarrier).Theta;
                // oracle: dJ0/dTheta = 1 / dTheta/dJ0, slope by central FD
                const double h = 1e-5;
                const double tp = deflection(ReducedInputs{E0, J0 + h}, kBarrier).Theta;
                const double tm = deflection(ReducedInputs{E0, J0 - h}, kBarrier).Theta;
                const double dtheta_dj = (tp - tm) / (2 * h);
                const double oracle = w * J0 / std::sin(th) / dtheta_dj;
                const auto b = cross_section(w, th, kBarrier, 3);
                CHECK(b.b == doctest::Approx(oracle).epsilon(1e-4));
            }
        }
    }
    SUBCASE("near-grazing values carry the uncertainty flag") {
        const auto b = cross_section(1.0, 0.5 * PI - 1e-6, kBarrier, 2);
        CHECK(b.uncertain);
    }
}

TEST_CASE("sigma_eps on a pre-collisional pair") {
    const double eps = 0.05;
    Rng rng(17, 3);
    int done = 0;
    for (int rep = 0; rep < 40 && done < 12; ++rep) {
        // build a pre-collisional pair at distance eps
        const Vec<2> nu = rng.unit_vector<2>();
        Vec<2> v1 = rng.normal_vec<2>(), v2 = rng.normal_vec<2>();
        if (dot(nu, v1 - v2) >= 0) std::swap(v1, v2);
        if (dot(nu, v1 - v2) >= 0) continue;
        const double J0 = wedge_norm(nu, v1 - v2) / norm(v1 - v2);
        if (J0 > 1 - 1e-6) continue;
        ++done;
        PhasePoint<2> z1{Vec<2>{0.3, -0.2} + eps * nu, v1};
        PhasePoint<2> z2{Vec<2>{0.3, -0.2}, v2};

        const auto out = scattering_operator_sigma_eps<2>(z1, z2, kBarrier, eps);

        // center of mass displaced by exactly (t_eps/2)(v1+v2)
        const Vec<2> cm_in = 0.5 * (z1.x + z2.x);
        const Vec<2> cm_out = 0.5 * (out.z1.x + out.z2.x);
        CHECK(norm(cm_out - cm_in - 0.5 * out.t_eps * (v1 + v2)) < 1e-15);

        // elastic relations
        CHECK(norm((out.z1.v + out.z2.v) - (v1 + v2)) < 1e-12);
        CHECK(norm2(out.z1.v) + norm2(out.z2.v) ==
              doctest::Approx(norm2(v1) + norm2(v2)).epsilon(1e-12));

        // post-collisional output at distance eps
        CHECK(norm(out.z1.x - out.z2.x) == doctest::Approx(eps).epsilon(1e-9));
        CHECK(dot(out.z1.x - out.z2.x, out.z1.v - out.z2.v) > 0);
    }
    CHECK(done >= 10);
}

TEST_CASE("sigma_eps against the two-body ODE oracle") {
    const double eps = 0.02;
    const ReducedIc ic = make_ic(5.0, 0.4);
    const Vec<2> vcm{0.3, -0.7};
    PhasePoint<2> z1{0.5 * eps * ic.dy0, vcm + 0.5 * ic.dw0};
    PhasePoint<2> z2{-0.5 * eps * ic.dy0, vcm - 0.5 * ic.dw0};

    const auto out = scattering_operator_sigma_eps<2>(z1, z2, kBarrier, eps);
    const auto tr = integrate_reduced_ode<2>(ic.dy0, ic.dw0, kBarrier, 2e-4);

    // oracle positions: center of mass flows uniformly for t_eps = eps tau*,
    // the relative coordinate is eps * dy(tau*)
    const double t_eps = eps * tr.tau_exit;
    const Vec<2> cm = 0.5 * (z1.x + z2.x) + t_eps * vcm;
    const Vec<2> x1_oracle = cm + 0.5 * eps * tr.dy_exit;
    const Vec<2> x2_oracle = cm - 0.5 * eps * tr.dy_exit;
    CHECK(norm(out.z1.x - x1_oracle) < 1e-6 * eps);
    CHECK(norm(out.z2.x - x2_oracle) < 1e-6 * eps);
    CHECK(norm(out.z1.v - (vcm + 0.5 * tr.dw_exit)) < 1e-6);
    CHECK(out.t_eps == doctest::Approx(t_eps).epsilon(1e-6));
}

TEST_CASE("sigma0 and its inverse") {
    Rng rng(23, 5);

    SUBCASE("hard-sphere sigma0 is the reflection map and an involution") {
        for (int rep = 0; rep < 20; ++rep) {
            const Vec<3> nu = rng.unit_vector<3>();
            Vec<3> v1 = rng.normal_vec<3>(), v2 = rng.normal_vec<3>();
            if (dot(nu, v1 - v2) >= 0) std::swap(v1, v2);
            const auto s = sigma0<3>(nu, v1, v2, potentials::hard_sphere(),
                                     InteractionKind::hard_sphere);
            CHECK(norm(s.nu - nu) == 0.0);
            // applying the reflection twice returns the inputs
            const double rad = dot(nu, s.v1 - s.v2);
            const Vec<3> v1_back = s.v1 - rad * nu;
            const Vec<3> v2_back = s.v2 + rad * nu;
            CHECK(norm(v1_back - v1) < 1e-14);
            CHECK(norm(v2_back - v2) < 1e-14);
        }
    }

    SUBCASE("potential sigma0_inverse composes to the identity") {
        int done = 0;
        for (int rep = 0; rep < 40 && done < 10; ++rep) {
            const Vec<2> nu = rng.unit_vector<2>();
            Vec<2> v1 = rng.normal_vec<2>(), v2 = rng.normal_vec<2>();
            if (dot(nu, v1 - v2) >= 0) std::swap(v1, v2);
            if (dot(nu, v1 - v2) >= 0) continue;
            const double J0 = wedge_norm(nu, v1 - v2) / norm(v1 - v2);
            if (J0 > 0.98) continue;
            ++done;
            const auto fwd = sigma0<2>(nu, v1, v2, kBarrier);
            const auto back = sigma0_inverse<2>(fwd.nu, fwd.v1, fwd.v2, kBarrier);
            CHECK(norm(back.nu - nu) < 1e-10);
            CHECK(norm(back.v1 - v1) < 1e-10);
            CHECK(norm(back.v2 - v2) < 1e-10);
            // conservation through the map
            CHECK(norm((fwd.v1 + fwd.v2) - (v1 + v2)) < 1e-13);
            CHECK(norm2(fwd.v1) + norm2(fwd.v2) ==
                  doctest::Approx(norm2(v1) + norm2(v2)).epsilon(1e-13));
        }
        CHECK(done >= 8);
    }
}

TEST_CASE("sigma_eps composed with its inverse is the identity") {
    const double eps = 0.03;
    Rng rng(24, 6);
    int done = 0;
    for (int rep = 0; rep < 40 && done < 10; ++rep) {
        const Vec<2> nu = rng.unit_vector<2>();
        Vec<2> v1 = rng.normal_vec<2>(), v2 = rng.normal_vec<2>();
        if (dot(nu, v1 - v2) >= 0) std::swap(v1, v2);
        if (dot(nu, v1 - v2) >= 0) continue;
        if (wedge_norm(nu, v1 - v2) / norm(v1 - v2) > 0.97) continue;
        ++done;
        PhasePoint<2> z1{Vec<2>{0.1, 0.4} + eps * nu, v1};
        PhasePoint<2> z2{Vec<2>{0.1, 0.4}, v2};
        const auto fwd = scattering_operator_sigma_eps<2>(z1, z2, kBarrier, eps);
        const auto back = sigma_eps_inverse<2>(fwd.z1, fwd.z2, kBarrier, eps);
        CHECK(norm(back.z1.x - z1.x) < 1e-9 * (1 + norm(z1.x)));
        CHECK(norm(back.z2.x - z2.x) < 1e-9);
        CHECK(norm(back.z1.v - z1.v) < 1e-9);
        CHECK(norm(back.z2.v - z2.v) < 1e-9);
        CHECK(back.t_eps == doctest::Approx(fwd.t_eps).epsilon(1e-9));
    }
    CHECK(done >= 8);
}

TEST_CASE("cross-section table interpolates the direct evaluation") {
    std::vector<double> E0s{0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> thetas;
    for (int i = 1; i <= 24; ++i) thetas.push_back(i * (0.5 * PI) / 26.0);
    const CrossSectionTable tab = build_cross_section_table(kBarrier, 2, E0s, thetas);

    // strictly increasing J0 rows
    for (std::size_t ie = 0; ie < E0s.size(); ++ie)
        for (std::size_t it = 1; it < thetas.size(); ++it)
            CHECK(tab.J0_of_Theta[ie * thetas.size() + it] >
                  tab.J0_of_Theta[ie * thetas.size() + it - 1]);

    // interpolation error at off-grid points
    const double w = std::sqrt(1.7);
    for (double th : {0.3, 0.8, 1.2}) {
        const double direct = cross_section(w, th, kBarrier, 2).b;
        CHECK(tab.b(w, th) == doctest::Approx(direct).epsilon(0.05));
    }
}
