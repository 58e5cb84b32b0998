#include <cmath>
#include <random>

#include "doctest.h"
#include "support/errorsys.hpp"
#include "support/fixtures.hpp"
#include "tcar/control.hpp"
#include "tcar/errors.hpp"
#include "tcar/sim.hpp"

using namespace tcar;

namespace {

ControllerKernels& reference_controller() {
    static ControllerKernels kk = [] {
        SolveOptions opt;
        opt.grid_n = 101;
        return solve_controller_kernels(fixtures::reference_pipeline().design, opt);
    }();
    return kk;
}

TrafficField reference_field(int n, double amplitude) {
    Pipeline& pipe = fixtures::reference_pipeline();
    SimConfig cfg;
    cfg.grid_n = n;
    cfg.amplitude = amplitude;
    return initial_profiles(pipe.eq, pipe.transform, pipe.road, cfg);
}

// Arbitrary nonzero injection gains: the plant/observer/error-system
// equivalences are structural and hold for any gain profile.
ObserverGains handmade_gains(const SpaceGrid& g) {
    ObserverGains gg;
    for (int c = 0; c < 3; ++c) {
        gg.p_plus[c].resize(g.n);
        for (int j = 0; j < g.n; ++j) gg.p_plus[c][j] = 0.01 * std::sin(0.7 * j + c);
    }
    gg.p11_minus.resize(g.n);
    for (int j = 0; j < g.n; ++j) gg.p11_minus[j] = 0.008 * std::cos(0.3 * j);
    return gg;
}

}  // namespace

TEST_CASE("inlet measurement reports absolute quantities and the leftward coordinate") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const TrafficField field = reference_field(60, 0.25);
    const Measurement m = measure_inlet(field, pipe.transform, pipe.eq);

    CHECK(m.y_bar == field.w[3][0]);
    CHECK(m.y1 == doctest::Approx(pipe.eq.rho_star[0] + field.p[0][0]).epsilon(1e-10));
    CHECK(m.y2 == doctest::Approx(pipe.eq.v_star[0] + field.p[1][0]).epsilon(1e-10));
    CHECK(m.y3 == doctest::Approx(pipe.eq.rho_star[1] + field.p[2][0]).epsilon(1e-10));
    CHECK(m.y4 == doctest::Approx(pipe.eq.v_star[1] + field.p[3][0]).epsilon(1e-10));

    // At equilibrium the sensors read the stars.
    const TrafficField flat = reference_field(60, 0.0);
    const Measurement m0 = measure_inlet(flat, pipe.transform, pipe.eq);
    CHECK(m0.y1 == doctest::Approx(pipe.eq.rho_star[0]).epsilon(1e-12));
    CHECK(m0.y4 == doctest::Approx(pipe.eq.v_star[1]).epsilon(1e-12));
    CHECK(m0.y_bar == 0.0);
}

TEST_CASE("feedback of the equilibrium state is exactly zero") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const ControllerKernels& kk = reference_controller();
    const TrafficField flat = reference_field(80, 0.0);

    CHECK(full_state_control(flat, kk, pipe.transform, pipe.design) == 0.0);

    const ObserverState obs = make_observer(flat.grid);
    CHECK(output_feedback_control(obs, kk, pipe.transform, pipe.design) == 0.0);
}

TEST_CASE("design feedback is linear in the profile") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const ControllerKernels& kk = reference_controller();
    const SpaceGrid grid(80, pipe.road.length);

    std::mt19937 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::array<std::vector<double>, 4> wa, wb, wc;
    for (int c = 0; c < 4; ++c) {
        wa[c].resize(grid.n);
        wb[c].resize(grid.n);
        wc[c].resize(grid.n);
        for (int j = 0; j < grid.n; ++j) {
            wa[c][j] = u(rng);
            wb[c][j] = u(rng);
        }
    }
    const double alpha = 0.37, beta = -1.21;
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < grid.n; ++j) wc[c][j] = alpha * wa[c][j] + beta * wb[c][j];

    const double ua = design_feedback(wa, grid, kk, pipe.design);
    const double ub = design_feedback(wb, grid, kk, pipe.design);
    const double uc = design_feedback(wc, grid, kk, pipe.design);
    CHECK(uc == doctest::Approx(alpha * ua + beta * ub).epsilon(1e-12).scale(1e-12));

    // Bounded by the reflection row plus the integrated kernel mass.
    double kernel_mass = std::abs(kk.l11.max_abs());
    for (int a = 0; a < 3; ++a) kernel_mass += kk.k[a].max_abs();
    double refl = 0.0;
    for (int a = 0; a < 3; ++a) refl += std::abs(pipe.design.R1_bar(a));
    double wsup = 0.0;
    for (int c = 0; c < 4; ++c)
        for (double v : wa[c]) wsup = std::max(wsup, std::abs(v));
    CHECK(std::abs(ua) <= (refl + pipe.road.length * kernel_mass) * wsup);
}

TEST_CASE("physical-state feedback equals the conjugated design feedback") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const ControllerKernels& kk = reference_controller();
    const TrafficField field = reference_field(101, 0.25);

    const double via_physical = full_state_control(field, kk, pipe.transform, pipe.design);
    const double via_design =
        pipe.transform.input_to_physical(design_feedback(field.w, field.grid, kk, pipe.design));
    REQUIRE(std::abs(via_design) > 0.0);
    CHECK(via_physical == doctest::Approx(via_design).epsilon(1e-10));
}

TEST_CASE("output feedback coincides with full-state feedback on a perfect estimate") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const ControllerKernels& kk = reference_controller();
    const TrafficField field = reference_field(101, 0.25);

    ObserverState obs = make_observer(field.grid);
    obs.w_hat = field.w;
    const double u_out = output_feedback_control(obs, kk, pipe.transform, pipe.design);
    const double u_full = full_state_control(field, kk, pipe.transform, pipe.design);
    CHECK(u_out == doctest::Approx(u_full).epsilon(1e-10));
}

TEST_CASE("observer initialized on the plant state shadows it bitwise") {
    Pipeline& pipe = fixtures::reference_pipeline();
    TrafficField field = reference_field(60, 0.25);
    const double dt = cfl_timestep(pipe.lin.lambdas, field.grid.dx, 0.9);
    const ObserverGains gains = handmade_gains(field.grid);

    ObserverState obs = make_observer(field.grid);
    obs.w_hat = field.w;

    for (int k = 0; k < 20; ++k) {
        const Measurement m_begin = measure_inlet(field, pipe.transform, pipe.eq);
        const double U = 0.02 * std::sin(0.3 * k);
        step(field, pipe.design, pipe.transform, U, dt);
        const Measurement m_end = measure_inlet(field, pipe.transform, pipe.eq);
        observer_step(obs, m_begin, m_end, pipe.transform.input_to_design(U), pipe.design, gains, dt);

        for (int c = 0; c < 4; ++c)
            for (int j = 0; j < field.grid.n; ++j) REQUIRE(obs.w_hat[c][j] == field.w[c][j]);
    }
}

TEST_CASE("plant minus observer reproduces the autonomous error dynamics") {
    Pipeline& pipe = fixtures::reference_pipeline();
    TrafficField field = reference_field(60, 0.25);
    const double dt = cfl_timestep(pipe.lin.lambdas, field.grid.dx, 0.9);
    const ObserverGains gains = handmade_gains(field.grid);

    ObserverState obs = make_observer(field.grid);  // zero estimate, error = plant state
    errorsys::State err = errorsys::make(field.grid);
    err.e = field.w;

    double escale = 0.0;
    for (int c = 0; c < 4; ++c)
        for (double v : field.w[c]) escale = std::max(escale, std::abs(v));
    REQUIRE(escale > 0.0);

    for (int k = 0; k < 60; ++k) {
        const Measurement m_begin = measure_inlet(field, pipe.transform, pipe.eq);
        const double U = 0.05 * std::sin(0.2 * k);
        step(field, pipe.design, pipe.transform, U, dt);
        const Measurement m_end = measure_inlet(field, pipe.transform, pipe.eq);
        observer_step(obs, m_begin, m_end, pipe.transform.input_to_design(U), pipe.design, gains, dt);
        errorsys::step(err, pipe.design, gains, dt);

        // Both use the same measured coordinate at the inlet, so by
        // construction the rightward estimation error vanishes there exactly.
        for (int c = 0; c < 3; ++c) REQUIRE(field.w[c][0] - obs.w_hat[c][0] == 0.0);
    }

    double dmax = 0.0;
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < field.grid.n; ++j)
            dmax = std::max(dmax, std::abs((field.w[c][j] - obs.w_hat[c][j]) - err.e[c][j]));
    CHECK(dmax < 1e-11 * std::max(1.0, escale));

    // The error is alive, not trivially zero.
    double esup = 0.0;
    for (int c = 0; c < 4; ++c)
        for (double v : err.e[c]) esup = std::max(esup, std::abs(v));
    CHECK(esup > 1e-6 * escale);
}

TEST_CASE("estimate reconstruction maps zero state to the equilibrium and inverts the transform") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const SpaceGrid grid(50, pipe.road.length);

    const ObserverState zero = make_observer(grid);
    const EstimatedField flat = estimates_to_physical(zero, pipe.transform, pipe.eq);
    for (int j = 0; j < grid.n; ++j) {
        CHECK(flat.value[0][j] == pipe.eq.rho_star[0]);
        CHECK(flat.value[1][j] == pipe.eq.v_star[0]);
        CHECK(flat.value[2][j] == pipe.eq.rho_star[1]);
        CHECK(flat.value[3][j] == pipe.eq.v_star[1]);
    }

    // Load a known physical perturbation through the inverse transform.
    ObserverState obs = make_observer(grid);
    std::array<std::vector<double>, 4> p_ref;
    for (int c = 0; c < 4; ++c) p_ref[c].resize(grid.n);
    for (int j = 0; j < grid.n; ++j) {
        const double x = grid.x(j);
        Eigen::Vector4d p;
        p << 0.01 * std::sin(0.006 * x), 0.05 * std::cos(0.004 * x), -0.008 * std::sin(0.005 * x),
            0.03 * std::sin(0.007 * x);
        const Eigen::Vector4d w = pipe.transform.to_design(x, p);
        for (int c = 0; c < 4; ++c) {
            p_ref[c][j] = p(c);
            obs.w_hat[c][j] = w(c);
        }
    }
    const EstimatedField est = estimates_to_physical(obs, pipe.transform, pipe.eq);
    const std::array<double, 4> offset{pipe.eq.rho_star[0], pipe.eq.v_star[0], pipe.eq.rho_star[1],
                                       pipe.eq.v_star[1]};
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < grid.n; ++j)
            CHECK(est.value[c][j] == doctest::Approx(offset[c] + p_ref[c][j]).epsilon(1e-10));
}

TEST_CASE("gain resampling is exact on shared nodes and linear between them") {
    const KernelProblem p = fixtures::synthetic_problem();
    SolveOptions opt;
    opt.grid_n = 51;
    opt.tolerance = 1e-10;
    opt.max_iterations = 400;
    const ObserverKernels ok = solve_observer_kernels(p, opt);

    const SpaceGrid fine(101, p.length);  // every second node shared
    const ObserverGains g = sample_gains(ok, fine);
    for (int i = 0; i < 51; ++i) {
        for (int a = 0; a < 3; ++a)
            CHECK(g.p_plus[a][2 * i] == doctest::Approx(ok.p_plus[a][i]).epsilon(1e-12).scale(1e-18));
        CHECK(g.p11_minus[2 * i] == doctest::Approx(ok.p11_minus[i]).epsilon(1e-12).scale(1e-18));
    }
    for (int i = 0; i + 1 < 51; ++i)
        for (int a = 0; a < 3; ++a) {
            const double mid = 0.5 * (ok.p_plus[a][i] + ok.p_plus[a][i + 1]);
            CHECK(g.p_plus[a][2 * i + 1] == doctest::Approx(mid).epsilon(1e-12).scale(1e-18));
        }
}

TEST_CASE("control and observer entry points reject mismatched domains and timesteps") {
    Pipeline& pipe = fixtures::reference_pipeline();
    const ControllerKernels& kk = reference_controller();

    const SpaceGrid half(40, pipe.road.length / 2.0);
    std::array<std::vector<double>, 4> w;
    for (auto& c : w) c.assign(half.n, 0.0);
    CHECK_THROWS_AS(design_feedback(w, half, kk, pipe.design), GridMismatch);

    SolveOptions opt;
    opt.grid_n = 31;
    const ObserverKernels ok = solve_observer_kernels(pipe.design, opt);
    CHECK_THROWS_AS(sample_gains(ok, half), GridMismatch);

    // Observer enforces the Courant bound like the plant does.
    TrafficField field = reference_field(60, 0.25);
    const double dt = cfl_timestep(pipe.lin.lambdas, field.grid.dx, 0.9);
    ObserverState obs = make_observer(field.grid);
    const ObserverGains gains = handmade_gains(field.grid);
    const Measurement m = measure_inlet(field, pipe.transform, pipe.eq);
    CHECK_THROWS_AS(observer_step(obs, m, m, 0.0, pipe.design, gains, 3.0 * dt), CFLViolation);
}
