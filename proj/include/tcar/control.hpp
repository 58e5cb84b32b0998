#pragma once

#include <array>
#include <vector>

#include "tcar/kernels.hpp"
#include "tcar/sim.hpp"

namespace tcar {

// Inlet sensor readings: absolute density and velocity of both classes at
// x = 0 plus the derived leftward design coordinate.
struct Measurement {
    double y1 = 0.0;  // rho1(0, t) [veh/m]
    double y2 = 0.0;  // v1(0, t) [m/s]
    double y3 = 0.0;  // rho2(0, t) [veh/m]
    double y4 = 0.0;  // v2(0, t) [m/s]
    double y_bar = 0.0;  // w4(0, t)
};

Measurement measure_inlet(const TrafficField& field, const CombinedTransform& transform,
                          const EquilibriumState& eq);

struct ObserverState {
    SpaceGrid grid;
    double time = 0.0;
    std::array<std::vector<double>, 4> w_hat;
};

ObserverState make_observer(const SpaceGrid& grid);

// Output injection gains resampled onto the simulation grid.
struct ObserverGains {
    std::array<std::vector<double>, 3> p_plus;
    std::vector<double> p11_minus;
};

ObserverGains sample_gains(const ObserverKernels& ok, const SpaceGrid& grid);

// Design-coordinate feedback: -R1_bar w+(L) plus the kernel-weighted integrals
// of the full profile. The physical law is the same functional conjugated by
// the transforms.
double design_feedback(const std::array<std::vector<double>, 4>& w, const SpaceGrid& grid,
                       const ControllerKernels& kernels, const DesignModel& design);

double full_state_control(const TrafficField& field, const ControllerKernels& kernels,
                          const CombinedTransform& transform, const DesignModel& design);

// One explicit upwind step of the observer with output injection against the
// measured inlet coordinate. meas_begin samples the plant at the step start
// (injection term), meas_end after the plant stepped (inlet condition), so a
// co-simulated observer minus plant reproduces the error dynamics exactly.
// The split halves mirror the plant step so the feedback can be evaluated on
// the updated estimate before the outlet closes.
void observer_advance_interior(ObserverState& obs, const Measurement& meas_begin,
                               const Measurement& meas_end, const DesignModel& design,
                               const ObserverGains& gains, double dt);
void observer_apply_outlet(ObserverState& obs, const DesignModel& design, double U_bar);
void observer_step(ObserverState& obs, const Measurement& meas_begin, const Measurement& meas_end,
                   double U_bar, const DesignModel& design, const ObserverGains& gains, double dt);

// Absolute density and velocity estimates reconstructed from observer state.
struct EstimatedField {
    SpaceGrid grid;
    std::array<std::vector<double>, 4> value;  // rho1, v1, rho2, v2
};

EstimatedField estimates_to_physical(const ObserverState& obs, const CombinedTransform& transform,
                                     const EquilibriumState& eq);

double output_feedback_control(const ObserverState& obs, const ControllerKernels& kernels,
                               const CombinedTransform& transform, const DesignModel& design);

}  // namespace tcar
