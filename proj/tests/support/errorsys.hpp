#pragma once

// Direct discretization of the estimation-error dynamics: the same upwind
// scheme applied to the error variables with homogeneous inlet reflection,
// reflection-only outlet, and output injection driven by the inlet error at
// the step start. Co-simulated plant minus observer must reproduce this
// trajectory to roundoff.

#include <array>
#include <vector>

#include "tcar/control.hpp"
#include "tcar/riemann.hpp"
#include "tcar/sim.hpp"

namespace errorsys {

struct State {
    tcar::SpaceGrid grid;
    std::array<std::vector<double>, 4> e;
};

inline State make(const tcar::SpaceGrid& grid) {
    State s;
    s.grid = grid;
    for (auto& c : s.e) c.assign(grid.n, 0.0);
    return s;
}

inline void step(State& s, const tcar::DesignModel& design, const tcar::ObserverGains& gains,
                 double dt) {
    const int n = s.grid.n;
    const double dx = s.grid.dx;
    const double e0 = s.e[3][0];
    auto next = s.e;
    const double num = design.lambda_minus * dt / dx;
    for (int j = 0; j < n; ++j) {
        const double x = s.grid.x(j);
        const Eigen::Matrix3d spp = design.sigma_pp(x);
        const Eigen::Vector3d spm = design.sigma_pm(x);
        const Eigen::RowVector3d smp = design.sigma_mp(x);
        const Eigen::Vector3d ep(s.e[0][j], s.e[1][j], s.e[2][j]);
        if (j >= 1) {
            const Eigen::Vector3d src = spp * ep + spm * s.e[3][j];
            for (int c = 0; c < 3; ++c) {
                const double nu = design.lambda_plus(c) * dt / dx;
                next[c][j] = s.e[c][j] - nu * (s.e[c][j] - s.e[c][j - 1]) +
                             dt * (src(c) - gains.p_plus[c][j] * e0);
            }
        }
        if (j <= n - 2)
            next[3][j] = s.e[3][j] + num * (s.e[3][j + 1] - s.e[3][j]) +
                         dt * ((smp * ep)(0) - gains.p11_minus[j] * e0);
    }
    for (int c = 0; c < 3; ++c) next[c][0] = 0.0;
    double r = 0.0;
    for (int c = 0; c < 3; ++c) r += design.R1_bar(c) * next[c][n - 1];
    next[3][n - 1] = r;
    s.e = std::move(next);
}

}  // namespace errorsys
