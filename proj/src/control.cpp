#include "tcar/control.hpp"

#include <cmath>
#include <sstream>

#include "tcar/errors.hpp"

namespace tcar {

namespace {

void check_kernel_grid(const TriangularGrid& kg, const SpaceGrid& sg, const char* who) {
    if (kg.n < 2 || sg.n < 2 || !(std::abs(kg.length - sg.length) <= 1e-9 * sg.length)) {
        std::ostringstream os;
        os << who << ": kernel domain length " << kg.length << " does not match field length "
           << sg.length;
        throw GridMismatch(os.str());
    }
}

// Linear interpolation of edge samples living on the kernel grid.
double edge_interp(const std::vector<double>& samples, const TriangularGrid& g, double x) {
    const double h = g.h;
    const double cx = std::clamp(x, 0.0, g.length);
    const int i = std::min(static_cast<int>(cx / h), g.n - 2);
    const double u = cx / h - i;
    return samples[i] * (1.0 - u) + samples[i + 1] * u;
}

}  // namespace

Measurement measure_inlet(const TrafficField& field, const CombinedTransform& transform,
                          const EquilibriumState& eq) {
    Measurement m;
    const Eigen::Vector4d w(field.w[0][0], field.w[1][0], field.w[2][0], field.w[3][0]);
    const Eigen::Vector4d p = transform.T(0.0) * w;
    m.y1 = eq.rho_star[0] + p(0);
    m.y2 = eq.v_star[0] + p(1);
    m.y3 = eq.rho_star[1] + p(2);
    m.y4 = eq.v_star[1] + p(3);
    m.y_bar = field.w[3][0];
    return m;
}

ObserverState make_observer(const SpaceGrid& grid) {
    ObserverState obs;
    obs.grid = grid;
    for (auto& v : obs.w_hat) v.assign(grid.n, 0.0);
    return obs;
}

ObserverGains sample_gains(const ObserverKernels& ok, const SpaceGrid& grid) {
    check_kernel_grid(ok.grid, grid, "sample_gains");
    ObserverGains g;
    for (int a = 0; a < 3; ++a) {
        g.p_plus[a].resize(grid.n);
        for (int j = 0; j < grid.n; ++j)
            g.p_plus[a][j] = edge_interp(ok.p_plus[a], ok.grid, grid.x(j));
    }
    g.p11_minus.resize(grid.n);
    for (int j = 0; j < grid.n; ++j)
        g.p11_minus[j] = edge_interp(ok.p11_minus, ok.grid, grid.x(j));
    return g;
}

double design_feedback(const std::array<std::vector<double>, 4>& w, const SpaceGrid& grid,
                       const ControllerKernels& kernels, const DesignModel& design) {
    check_kernel_grid(kernels.grid, grid, "design_feedback");
    const double L = design.length;
    double u = 0.0;
    for (int a = 0; a < 3; ++a) u -= design.R1_bar(a) * w[a][grid.n - 1];
    double prev = 0.0;
    for (int j = 0; j < grid.n; ++j) {
        const double xi = grid.x(j);
        double f = kernels.l11.interp(L, xi) * w[3][j];
        for (int a = 0; a < 3; ++a) f += kernels.k[a].interp(L, xi) * w[a][j];
        if (j > 0) u += 0.5 * grid.dx * (prev + f);
        prev = f;
    }
    return u;
}

double full_state_control(const TrafficField& field, const ControllerKernels& kernels,
                          const CombinedTransform& transform, const DesignModel& design) {
    check_kernel_grid(kernels.grid, field.grid, "full_state_control");
    const double L = design.length;
    const int n = field.grid.n;
    auto p_at = [&](int j) {
        return Eigen::Vector4d(field.p[0][j], field.p[1][j], field.p[2][j], field.p[3][j]);
    };
    double u = -(design.R1_bar * (transform.T_u_inv(L) * p_at(n - 1)))(0);
    double prev = 0.0;
    for (int j = 0; j < n; ++j) {
        const double xi = field.grid.x(j);
        const Eigen::Vector3d wp = transform.T_u_inv(xi) * p_at(j);
        const double wm = transform.T_l_inv(xi) * p_at(j);
        double f = kernels.l11.interp(L, xi) * wm;
        for (int a = 0; a < 3; ++a) f += kernels.k[a].interp(L, xi) * wp(a);
        if (j > 0) u += 0.5 * field.grid.dx * (prev + f);
        prev = f;
    }
    return transform.input_to_physical(u);
}

void observer_advance_interior(ObserverState& obs, const Measurement& meas_begin,
                               const Measurement& meas_end, const DesignModel& design,
                               const ObserverGains& gains, double dt) {
    const int n = obs.grid.n;
    const double dx = obs.grid.dx;
    const double slack = 1.0 + 1e-12;
    for (int c = 0; c < 3; ++c) {
        const double nu = design.lambda_plus(c) * dt / dx;
        if (!(nu > 0.0 && nu <= slack))
            throw CFLViolation("observer_step: rightward Courant number outside (0,1]");
    }
    if (!(design.lambda_minus * dt / dx <= slack))
        throw CFLViolation("observer_step: leftward Courant number outside (0,1]");

    // Injection error uses the estimate and measurement at the step start.
    const double e0 = obs.w_hat[3][0] - meas_begin.y_bar;

    std::array<std::vector<double>, 4> next = obs.w_hat;
    const double num = design.lambda_minus * dt / dx;
    for (int j = 0; j < n; ++j) {
        const double x = obs.grid.x(j);
        const Eigen::Matrix3d spp = design.sigma_pp(x);
        const Eigen::Vector3d spm = design.sigma_pm(x);
        const Eigen::RowVector3d smp = design.sigma_mp(x);
        const Eigen::Vector3d wp(obs.w_hat[0][j], obs.w_hat[1][j], obs.w_hat[2][j]);
        if (j >= 1) {
            const Eigen::Vector3d src = spp * wp + spm * obs.w_hat[3][j];
            for (int c = 0; c < 3; ++c) {
                const double nu = design.lambda_plus(c) * dt / dx;
                next[c][j] = obs.w_hat[c][j] - nu * (obs.w_hat[c][j] - obs.w_hat[c][j - 1]) +
                             dt * (src(c) - gains.p_plus[c][j] * e0);
            }
        }
        if (j <= n - 2)
            next[3][j] = obs.w_hat[3][j] + num * (obs.w_hat[3][j + 1] - obs.w_hat[3][j]) +
                         dt * ((smp * wp)(0) - gains.p11_minus[j] * e0);
    }
    // Inlet reflection is driven by the measured coordinate, not the estimate.
    for (int c = 0; c < 3; ++c) next[c][0] = design.Q0_bar(c) * meas_end.y_bar;
    obs.w_hat = std::move(next);
    obs.time += dt;
}

void observer_apply_outlet(ObserverState& obs, const DesignModel& design, double U_bar) {
    const int n = obs.grid.n;
    double s = U_bar;
    for (int c = 0; c < 3; ++c) s += design.R1_bar(c) * obs.w_hat[c][n - 1];
    obs.w_hat[3][n - 1] = s;
    for (int c = 0; c < 4; ++c)
        for (double v : obs.w_hat[c])
            if (!std::isfinite(v)) throw NonFiniteState("observer_step: non-finite estimate");
}

void observer_step(ObserverState& obs, const Measurement& meas_begin, const Measurement& meas_end,
                   double U_bar, const DesignModel& design, const ObserverGains& gains, double dt) {
    observer_advance_interior(obs, meas_begin, meas_end, design, gains, dt);
    observer_apply_outlet(obs, design, U_bar);
}

EstimatedField estimates_to_physical(const ObserverState& obs, const CombinedTransform& transform,
                                     const EquilibriumState& eq) {
    EstimatedField f;
    f.grid = obs.grid;
    const std::array<double, 4> offset{eq.rho_star[0], eq.v_star[0], eq.rho_star[1], eq.v_star[1]};
    for (int c = 0; c < 4; ++c) f.value[c].assign(obs.grid.n, 0.0);
    for (int j = 0; j < obs.grid.n; ++j) {
        const Eigen::Vector4d w(obs.w_hat[0][j], obs.w_hat[1][j], obs.w_hat[2][j], obs.w_hat[3][j]);
        const Eigen::Vector4d p = transform.T(obs.grid.x(j)) * w;
        for (int c = 0; c < 4; ++c) f.value[c][j] = offset[c] + p(c);
    }
    return f;
}

double output_feedback_control(const ObserverState& obs, const ControllerKernels& kernels,
                               const CombinedTransform& transform, const DesignModel& design) {
    return transform.input_to_physical(design_feedback(obs.w_hat, obs.grid, kernels, design));
}

}  // namespace tcar
