#pragma once

#include <string>

#include "tcar/control.hpp"
#include "tcar/kernels.hpp"
#include "tcar/model.hpp"
#include "tcar/sim.hpp"

namespace tcar {

// 17 significant digits, locale independent; round-trips doubles exactly.
std::string format_double(double v);

// Writes to <path>.tmp in the same directory, then renames over <path>.
void write_text_atomic(const std::string& path, const std::string& content);

std::string snapshots_csv(const Trajectory& traj, const SpaceGrid& grid, const EquilibriumState& eq);
std::string series_csv(const Trajectory& traj);
std::string controller_kernels_csv(const ControllerKernels& kk);
std::string observer_kernels_csv(const ObserverKernels& ok);
std::string observer_gains_csv(const ObserverKernels& ok);
std::string lambda4_grid_csv(const RegimeScan& scan);
std::string contour_csv(const RegimeScan& scan);
std::string residual_report_text(const ControllerResiduals& cr, const ObserverResiduals& orr,
                                 const ControllerKernels& kk, const ObserverKernels& ok);

}  // namespace tcar
