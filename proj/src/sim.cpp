#include "tcar/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tcar/control.hpp"
#include "tcar/errors.hpp"

namespace tcar {

namespace {

void check_courant(const DesignModel& design, double dt, double dx) {
    const double slack = 1.0 + 1e-12;
    for (int c = 0; c < 3; ++c) {
        const double nu = design.lambda_plus(c) * dt / dx;
        if (!(nu > 0.0 && nu <= slack)) {
            std::ostringstream os;
            os << "step: Courant number " << nu << " of rightward family " << c + 1
               << " outside (0,1], dt = " << dt;
            throw CFLViolation(os.str());
        }
    }
    const double nu = design.lambda_minus * dt / dx;
    if (!(nu > 0.0 && nu <= slack)) {
        std::ostringstream os;
        os << "step: Courant number " << nu << " of the leftward family outside (0,1], dt = " << dt;
        throw CFLViolation(os.str());
    }
}

void check_finite_state(const TrafficField& field) {
    for (int c = 0; c < 4; ++c)
        for (double v : field.w[c])
            if (!std::isfinite(v)) {
                std::ostringstream os;
                os << "step: non-finite state at t = " << field.time;
                throw NonFiniteState(os.str());
            }
}

}  // namespace

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::OpenLoop: return "open-loop";
        case Scenario::FullStateFeedback: return "full-state";
        case Scenario::OutputFeedback: return "output-feedback";
    }
    return "?";
}

void SimConfig::validate() const {
    if (grid_n < 3) throw ValidationError("sim: requires grid_n >= 3, got " + std::to_string(grid_n));
    if (!(cfl_fraction > 0.0 && cfl_fraction <= 1.0))
        throw ValidationError("sim: requires 0 < cfl_fraction <= 1, got " + std::to_string(cfl_fraction));
    if (!std::isfinite(amplitude) || amplitude < 0.0)
        throw ValidationError("sim: requires amplitude >= 0, got " + std::to_string(amplitude));
    if (snapshot_target < 2)
        throw ValidationError("sim: requires snapshot_target >= 2, got " +
                              std::to_string(snapshot_target));
    if (kernel_options.grid_n < 3)
        throw ValidationError("sim: requires kernel grid_n >= 3, got " +
                              std::to_string(kernel_options.grid_n));
    if (!(kernel_options.tolerance > 0.0))
        throw ValidationError("sim: requires kernel tolerance > 0");
    if (kernel_options.max_iterations < 1)
        throw ValidationError("sim: requires kernel max_iterations >= 1");
}

TrafficField initial_profiles(const EquilibriumState& eq, const CombinedTransform& transform,
                              const RoadParams& road, const SimConfig& config) {
    config.validate();
    TrafficField f;
    f.grid = SpaceGrid(config.grid_n, road.length);
    const double k = config.wavenumber > 0.0 ? config.wavenumber : 4.0 * M_PI / road.length;
    for (int c = 0; c < 4; ++c) {
        f.p[c].assign(f.grid.n, 0.0);
        f.w[c].assign(f.grid.n, 0.0);
    }
    for (int j = 0; j < f.grid.n; ++j) {
        const double s = std::sin(k * f.grid.x(j));
        Eigen::Vector4d p;
        p << config.amplitude * eq.rho_star[0] * s, -config.amplitude * eq.v_star[0] * s,
            config.amplitude * eq.rho_star[1] * s, -config.amplitude * eq.v_star[1] * s;
        const Eigen::Vector4d w = transform.T_inv(f.grid.x(j)) * p;
        for (int c = 0; c < 4; ++c) {
            f.p[c][j] = p(c);
            f.w[c][j] = w(c);
        }
    }
    return f;
}

double cfl_timestep(const std::array<double, 4>& lambdas, double dx, double cfl_fraction) {
    if (!(dx > 0.0)) throw ValidationError("cfl_timestep: requires dx > 0");
    if (!(cfl_fraction > 0.0 && cfl_fraction <= 1.0))
        throw ValidationError("cfl_timestep: requires 0 < cfl_fraction <= 1");
    double vmax = 0.0;
    for (double l : lambdas) vmax = std::max(vmax, std::abs(l));
    if (!(vmax > 0.0)) throw ValidationError("cfl_timestep: all characteristic speeds vanish");
    return cfl_fraction * dx / vmax;
}

void advance_interior(TrafficField& field, const DesignModel& design, double dt) {
    const int n = field.grid.n;
    const double dx = field.grid.dx;
    check_courant(design, dt, dx);

    std::array<std::vector<double>, 4> next = field.w;
    const double num = design.lambda_minus * dt / dx;
    for (int j = 0; j < n; ++j) {
        const double x = field.grid.x(j);
        const Eigen::Matrix3d spp = design.sigma_pp(x);
        const Eigen::Vector3d spm = design.sigma_pm(x);
        const Eigen::RowVector3d smp = design.sigma_mp(x);
        const Eigen::Vector3d wp(field.w[0][j], field.w[1][j], field.w[2][j]);
        if (j >= 1) {
            const Eigen::Vector3d src = spp * wp + spm * field.w[3][j];
            for (int c = 0; c < 3; ++c) {
                const double nu = design.lambda_plus(c) * dt / dx;
                next[c][j] =
                    field.w[c][j] - nu * (field.w[c][j] - field.w[c][j - 1]) + dt * src(c);
            }
        }
        if (j <= n - 2)
            next[3][j] =
                field.w[3][j] + num * (field.w[3][j + 1] - field.w[3][j]) + dt * (smp * wp)(0);
    }
    for (int c = 0; c < 3; ++c) next[c][0] = design.Q0_bar(c) * next[3][0];
    field.w = std::move(next);
    field.time += dt;
}

void apply_outlet(TrafficField& field, const DesignModel& design, const CombinedTransform& transform,
                  double U) {
    const int n = field.grid.n;
    double s = transform.input_to_design(U);
    for (int c = 0; c < 3; ++c) s += design.R1_bar(c) * field.w[c][n - 1];
    field.w[3][n - 1] = s;
    for (int j = 0; j < n; ++j) {
        const Eigen::Vector4d w(field.w[0][j], field.w[1][j], field.w[2][j], field.w[3][j]);
        const Eigen::Vector4d p = transform.T(field.grid.x(j)) * w;
        for (int c = 0; c < 4; ++c) field.p[c][j] = p(c);
    }
    check_finite_state(field);
}

void step(TrafficField& field, const DesignModel& design, const CombinedTransform& transform, double U,
          double dt) {
    advance_interior(field, design, dt);
    apply_outlet(field, design, transform, U);
}

double sup_norm(const TrafficField& field, const EquilibriumState& eq) {
    const std::array<double, 4> scale{eq.rho_star[0], eq.v_star[0], eq.rho_star[1], eq.v_star[1]};
    double m = 0.0;
    for (int c = 0; c < 4; ++c)
        for (double v : field.p[c]) m = std::max(m, std::abs(v) / scale[c]);
    return m;
}

double l2_norm(const TrafficField& field, const EquilibriumState& eq) {
    const std::array<double, 4> scale{eq.rho_star[0], eq.v_star[0], eq.rho_star[1], eq.v_star[1]};
    const int n = field.grid.n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) {
            const double v = field.p[c][j] / scale[c];
            s += v * v;
        }
        acc += (j == 0 || j == n - 1) ? 0.5 * s : s;
    }
    return std::sqrt(acc * field.grid.dx);
}

double finite_time_horizon(const DesignModel& design) {
    return design.length / design.lambda_plus(0) + design.length / design.lambda_minus;
}

Pipeline build_pipeline(const TwoClasses& classes, const RoadParams& road,
                        const std::array<double, 2>& rho_star) {
    classes[0].validate("class 1");
    classes[1].validate("class 2");
    road.validate();
    Pipeline pipe;
    pipe.classes = classes;
    pipe.road = road;
    pipe.eq = compute_equilibrium(rho_star, road, classes);
    pipe.lin = linearize(pipe.eq, pressure_gradients(pipe.eq, road, classes), classes);
    pipe.dec = diagonalize(pipe.lin, pipe.eq);
    pipe.design = build_design_model(pipe.dec, pipe.lin, road);
    pipe.transform = build_transform(pipe.dec, pipe.design);
    return pipe;
}

Trajectory run_scenario(Pipeline& pipe, const SimConfig& config) {
    config.validate();
    const bool need_controller = config.scenario != Scenario::OpenLoop;
    const bool need_observer = config.scenario == Scenario::OutputFeedback;
    if (need_controller && !pipe.controller)
        pipe.controller = solve_controller_kernels(pipe.design, config.kernel_options);
    if (need_observer && !pipe.observer)
        pipe.observer = solve_observer_kernels(pipe.design, config.kernel_options);

    TrafficField field = initial_profiles(pipe.eq, pipe.transform, pipe.road, config);
    const double t_f = finite_time_horizon(pipe.design);
    const double t_end = config.t_end > 0.0
                             ? config.t_end
                             : (need_observer ? 2.2 * t_f : 1.1 * t_f);
    const double dt = cfl_timestep(pipe.lin.lambdas, field.grid.dx, config.cfl_fraction);
    const long steps = std::max(1L, static_cast<long>(std::ceil(t_end / dt - 1e-12)));

    ObserverState obs;
    ObserverGains gains;
    if (need_observer) {
        obs = make_observer(field.grid);
        gains = sample_gains(*pipe.observer, field.grid);
    }

    Trajectory traj;
    traj.t_f = t_f;
    traj.two_t_f = 2.0 * t_f;

    const long stride = std::max(1L, (steps + config.snapshot_target - 1) /
                                         static_cast<long>(config.snapshot_target));
    auto record = [&](double u_applied, double err) {
        traj.t.push_back(field.time);
        traj.sup.push_back(sup_norm(field, pipe.eq));
        traj.l2.push_back(l2_norm(field, pipe.eq));
        traj.u.push_back(u_applied);
        if (need_observer) traj.observer_error.push_back(err);
    };
    auto snapshot = [&]() {
        Snapshot s;
        s.t = field.time;
        s.p = field.p;
        s.w = field.w;
        traj.snapshots.push_back(std::move(s));
    };
    auto observer_error_sup = [&]() {
        double m = 0.0;
        for (int c = 0; c < 4; ++c)
            for (int j = 0; j < field.grid.n; ++j)
                m = std::max(m, std::abs(obs.w_hat[c][j] - field.w[c][j]));
        return m;
    };

    record(0.0, need_observer ? observer_error_sup() : 0.0);
    snapshot();

    for (long k = 0; k < steps; ++k) {
        const double dt_k = std::min(dt, t_end - field.time);
        if (!(dt_k > 0.0)) break;
        double u = 0.0;
        switch (config.scenario) {
            case Scenario::OpenLoop:
                advance_interior(field, pipe.design, dt_k);
                break;
            case Scenario::FullStateFeedback: {
                // Feedback is evaluated on the updated interior state so the
                // outlet condition and the input refer to the same instant.
                advance_interior(field, pipe.design, dt_k);
                const double u_bar =
                    design_feedback(field.w, field.grid, *pipe.controller, pipe.design);
                u = pipe.transform.input_to_physical(u_bar);
                break;
            }
            case Scenario::OutputFeedback: {
                const Measurement meas_begin = measure_inlet(field, pipe.transform, pipe.eq);
                advance_interior(field, pipe.design, dt_k);
                const Measurement meas_end = measure_inlet(field, pipe.transform, pipe.eq);
                observer_advance_interior(obs, meas_begin, meas_end, pipe.design, gains, dt_k);
                const double u_bar =
                    design_feedback(obs.w_hat, obs.grid, *pipe.controller, pipe.design);
                observer_apply_outlet(obs, pipe.design, u_bar);
                u = pipe.transform.input_to_physical(u_bar);
                break;
            }
        }
        apply_outlet(field, pipe.design, pipe.transform, u);
        record(u, need_observer ? observer_error_sup() : 0.0);
        if ((k + 1) % stride == 0 || k + 1 == steps) snapshot();
    }
    return traj;
}

ConvergenceReport convergence_metrics(const Trajectory& traj, const DesignModel& design,
                                      double threshold_fraction) {
    if (traj.t.empty()) throw ValidationError("convergence_metrics: empty trajectory");
    ConvergenceReport r;
    r.t_f = finite_time_horizon(design);
    r.two_t_f = 2.0 * r.t_f;
    const double sup0 = traj.sup.front();
    r.threshold = threshold_fraction * sup0;
    r.normalized_sup.reserve(traj.sup.size());
    for (double s : traj.sup) r.normalized_sup.push_back(sup0 > 0.0 ? s / sup0 : 0.0);
    int settled = -1;
    for (int k = static_cast<int>(traj.sup.size()) - 1; k >= 0; --k) {
        if (traj.sup[k] < r.threshold)
            settled = k;
        else
            break;
    }
    if (settled >= 0) r.time_to_threshold = traj.t[settled];
    r.final_ratio = sup0 > 0.0 ? traj.sup.back() / sup0 : 0.0;
    return r;
}

}  // namespace tcar
