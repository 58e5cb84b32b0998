#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tcar/kernels.hpp"
#include "tcar/riemann.hpp"

namespace tcar {

struct SpaceGrid {
    int n = 0;
    double dx = 0.0;
    double length = 0.0;

    SpaceGrid() = default;
    SpaceGrid(int n_, double length_) : n(n_), dx(length_ / (n_ - 1)), length(length_) {}
    double x(int j) const { return j * dx; }
};

// Perturbation state carried in design coordinates w; the physical
// representation p = (rho1~, v1~, rho2~, v2~) is kept in sync via T(x).
struct TrafficField {
    SpaceGrid grid;
    double time = 0.0;
    std::array<std::vector<double>, 4> w;
    std::array<std::vector<double>, 4> p;
};

enum class Scenario { OpenLoop, FullStateFeedback, OutputFeedback };

const char* scenario_name(Scenario s);

struct SimConfig {
    int grid_n = 200;
    double cfl_fraction = 0.9;
    double t_end = -1.0;  // <= 0 picks the scenario default horizon
    Scenario scenario = Scenario::OpenLoop;
    double amplitude = 0.25;    // initial oscillation fraction of equilibrium
    double wavenumber = -1.0;   // [1/m]; < 0 picks 4*pi/L
    int snapshot_target = 200;  // upper bound on stored snapshots
    SolveOptions kernel_options{};

    void validate() const;
};

TrafficField initial_profiles(const EquilibriumState& eq, const CombinedTransform& transform,
                              const RoadParams& road, const SimConfig& config);

double cfl_timestep(const std::array<double, 4>& lambdas, double dx, double cfl_fraction);

// One explicit upwind step: interior update with source terms, then the inlet
// reflection from the updated leftward value, then the outlet condition with
// the supplied physical input U. The caller chooses the instant U refers to;
// advance_interior/apply_outlet expose the two halves so feedback can be
// evaluated on the updated state before the outlet closes.
void advance_interior(TrafficField& field, const DesignModel& design, double dt);
void apply_outlet(TrafficField& field, const DesignModel& design, const CombinedTransform& transform,
                  double U);
void step(TrafficField& field, const DesignModel& design, const CombinedTransform& transform, double U,
          double dt);

// Sup and L2 norms of the physical perturbations, each component normalized by
// its equilibrium value so densities and velocities weigh equally.
double sup_norm(const TrafficField& field, const EquilibriumState& eq);
double l2_norm(const TrafficField& field, const EquilibriumState& eq);

// Slowest loop through the section: down the slowest rightward characteristic
// and back along the leftward one.
double finite_time_horizon(const DesignModel& design);

struct Snapshot {
    double t = 0.0;
    std::array<std::vector<double>, 4> p;
    std::array<std::vector<double>, 4> w;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<double> sup;
    std::vector<double> l2;
    std::vector<double> u;               // physical control input per step
    std::vector<double> observer_error;  // design-coordinate error sup; empty unless observed
    std::vector<Snapshot> snapshots;
    double t_f = 0.0;
    double two_t_f = 0.0;
};

struct Pipeline {
    TwoClasses classes;
    RoadParams road;
    EquilibriumState eq;
    Linearization lin;
    SpectralDecomposition dec;
    DesignModel design;
    CombinedTransform transform;
    std::optional<ControllerKernels> controller;
    std::optional<ObserverKernels> observer;
};

Pipeline build_pipeline(const TwoClasses& classes, const RoadParams& road,
                        const std::array<double, 2>& rho_star);

// Solves whichever kernel sets the scenario needs (cached on the pipeline),
// then runs the closed loop and records norms, input and snapshots.
Trajectory run_scenario(Pipeline& pipe, const SimConfig& config);

struct ConvergenceReport {
    double t_f = 0.0;
    double two_t_f = 0.0;
    double threshold = 0.0;          // absolute sup-norm threshold used
    double time_to_threshold = -1.0; // first time sup stays below; -1 if never
    double final_ratio = 0.0;        // last sup over initial sup
    std::vector<double> normalized_sup;
};

ConvergenceReport convergence_metrics(const Trajectory& traj, const DesignModel& design,
                                      double threshold_fraction = 0.05);

}  // namespace tcar
