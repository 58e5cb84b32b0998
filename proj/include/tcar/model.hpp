#pragma once
#include <Eigen/Dense>
#include <array>
#include <utility>
#include <vector>

#include "tcar/errors.hpp"

namespace tcar {

// All quantities are SI internally: m, s, veh/m, m/s.

struct VehicleClassParams {
    double tau;     // relaxation time [s]
    double gamma;   // pressure exponent, > 1
    double v_free;  // free-flow velocity [m/s]
    double ao_max;  // area occupancy at which the class comes to rest, in (0, 1]
    double a;       // road surface occupied per vehicle [m^2]

    void validate(const char* label) const;
};

struct RoadParams {
    double width;   // W [m]
    double length;  // L [m]

    void validate() const;
};

using TwoClasses = std::array<VehicleClassParams, 2>;

struct EquilibriumState {
    std::array<double, 2> rho_star;  // [veh/m]
    std::array<double, 2> v_star;    // [m/s]
    std::array<double, 2> q_star;    // [veh/s]
    double ao_star;
};

enum class Regime { Free, Congested, Boundary };

const char* regime_name(Regime r);

// Default tolerance for deciding the sign of a characteristic speed [m/s].
inline constexpr double kRegimeTol = 1e-9;

struct Linearization {
    Eigen::Matrix2d beta;            // pressure gradients beta_ij [m^2/s per veh/m ... = m^2/s * m/veh]
    std::array<double, 2> alpha;     // diagonal entries beta_ii
    Eigen::Matrix4d jac_x;           // time-decoupled convection Jacobian
    Eigen::Matrix4d jac_src;         // time-decoupled source Jacobian
    std::array<double, 4> lambdas;   // characteristic speeds [m/s]
    double delta;                    // discriminant of the lambda_3/lambda_4 pair [m/s]
    Regime regime;
};

double area_occupancy(double rho1, double rho2, const RoadParams& road, const TwoClasses& classes);
double pressure(double ao, const VehicleClassParams& cls);
double equilibrium_speed(double ao, const VehicleClassParams& cls);

EquilibriumState compute_equilibrium(const std::array<double, 2>& rho_star, const RoadParams& road,
                                     const TwoClasses& classes);

Eigen::Matrix2d pressure_gradients(const EquilibriumState& eq, const RoadParams& road,
                                   const TwoClasses& classes);

Regime classify_regime(const std::array<double, 4>& lambdas, double tol = kRegimeTol);

Linearization linearize(const EquilibriumState& eq, const Eigen::Matrix2d& beta,
                        const TwoClasses& classes, double regime_tol = kRegimeTol);

struct RegimeScan {
    std::vector<double> rho1;     // axis samples [veh/m]
    std::vector<double> rho2;     // axis samples [veh/m]
    std::vector<double> lambda4;  // row-major [i * rho2.size() + j]; NaN where infeasible
    struct Vertex {
        double rho1;
        double rho2;
        double lambda4;  // re-evaluated at the vertex
    };
    std::vector<std::vector<Vertex>> contours;  // chained zero-contour polylines
    double tolerance;                           // |lambda4| bound guaranteed at vertices [m/s]
};

RegimeScan congestion_boundary_scan(const RoadParams& road, const TwoClasses& classes,
                                    std::pair<double, double> rho1_range,
                                    std::pair<double, double> rho2_range, int resolution);

}  // namespace tcar
