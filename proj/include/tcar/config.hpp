#pragma once

#include <array>
#include <string>

#include "tcar/model.hpp"
#include "tcar/sim.hpp"

namespace tcar {

struct ContourConfig {
    // SI defaults equal 1..250 veh/km by 0.5..125 veh/km.
    double rho1_min = 0.001;
    double rho1_max = 0.250;
    double rho2_min = 0.0005;
    double rho2_max = 0.125;
    int resolution = 200;

    void validate() const;
};

// Fully validated run description in SI units.
struct RunConfig {
    TwoClasses classes;
    RoadParams road;
    std::array<double, 2> rho_star{};  // [veh/m]
    SimConfig sim;
    ContourConfig contour;
    std::string out_dir = "out";
};

// Plain-text key-value schema; every dimensioned value carries a unit suffix
// (e.g. "v_free_1 = 80 km/h"). '#' starts a comment. ParseError flags
// structural problems (bad syntax, unknown key, missing key, bad unit);
// ValidationError flags values that violate a model invariant.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

Scenario scenario_from_name(const std::string& name);

}  // namespace tcar
