#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "tcar/model.hpp"

namespace tcar {

// Eigenbasis of the flux Jacobian and the source term expressed in it.
// Columns of V are right eigenvectors ordered (lambda1, lambda2, lambda3, lambda4);
// the scaling gauge is fixed by diagonalize(), and every downstream quantity that
// depends on it cancels in physical coordinates.
struct SpectralDecomposition {
    Eigen::Matrix4d V;
    Eigen::Matrix4d V_inv;
    Eigen::Matrix4d J_hat;  // V_inv * jac_src * V
    Eigen::Vector4d kappa;  // outlet flow perturbation weights per eigendirection
    Eigen::Vector3d Q0_hat;     // inlet reflection onto (e1,e2,e3) amplitudes
    Eigen::RowVector3d R1_hat;  // outlet reflection of (e1,e2,e3) amplitudes into e4
};

SpectralDecomposition diagonalize(const Linearization& lin, const EquilibriumState& eq);

// Rebuilds the decomposition with eigenvector columns rescaled by a positive
// diagonal. All physical-space outputs of the pipeline must be invariant
// under this change of gauge.
SpectralDecomposition rescale_gauge(const SpectralDecomposition& dec, const Linearization& lin,
                                    const EquilibriumState& eq, const Eigen::Vector4d& scale);

// Exponentially rescaled, reordered system on x in [0, L]:
// slots (1,2,3) carry the rightward characteristics ordered by the design
// permutation (v2, lambda3, v1), slot 4 the leftward one.
struct DesignModel {
    Eigen::Vector3d lambda_plus;
    double lambda_minus = 0.0;  // -lambda4 > 0 in the congested regime
    double length = 0.0;
    std::array<double, 4> rate{};  // per-slot exponential rescaling rates [1/m]
    Eigen::Matrix3d cpp, dpp;      // sigma^{++}(x) = cpp .* exp(dpp * x), zero diagonal
    Eigen::Vector3d cpm, dpm;      // sigma^{+-}(x) = cpm .* exp(dpm * x)
    Eigen::RowVector3d cmp, dmp;   // sigma^{-+}(x) = cmp .* exp(dmp * x)
    Eigen::Vector3d Q0_bar;        // inlet reflection in design coordinates
    Eigen::RowVector3d R1_bar;     // outlet reflection in design coordinates

    double lambda4() const { return -lambda_minus; }

    Eigen::Matrix3d sigma_pp(double x) const {
        Eigen::Matrix3d s;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s(i, j) = cpp(i, j) * std::exp(dpp(i, j) * x);
        return s;
    }
    Eigen::Vector3d sigma_pm(double x) const {
        return cpm.array() * (dpm.array() * x).exp();
    }
    Eigen::RowVector3d sigma_mp(double x) const {
        return cmp.array() * (dmp.array() * x).exp();
    }
};

DesignModel build_design_model(const SpectralDecomposition& dec, const Linearization& lin,
                               const RoadParams& road);

// Composite map between physical perturbations p = (rho1~, v1~, rho2~, v2~) and
// design coordinates w: p = T(x) w, w = T_inv(x) p. Gauge-invariant by construction.
struct CombinedTransform {
    Eigen::Matrix4d V;
    Eigen::Matrix4d V_inv;
    std::array<double, 4> rate{};  // design-slot rates, same order as DesignModel
    double length = 0.0;
    double kappa4 = 0.0;
    double gain = 0.0;  // physical input per unit design input

    Eigen::Matrix4d T(double x) const;
    Eigen::Matrix4d T_inv(double x) const;
    // Rows 1..3 of T_inv (rightward design components of a physical state).
    Eigen::Matrix<double, 3, 4> T_u_inv(double x) const;
    // Row 4 of T_inv (leftward design component).
    Eigen::RowVector4d T_l_inv(double x) const;

    double input_gain() const { return gain; }
    double input_to_design(double U) const { return U / gain; }
    double input_to_physical(double U_bar) const { return gain * U_bar; }

    Eigen::Vector4d to_design(double x, const Eigen::Vector4d& p) const { return T_inv(x) * p; }
    Eigen::Vector4d to_physical(double x, const Eigen::Vector4d& w) const { return T(x) * w; }
};

CombinedTransform build_transform(const SpectralDecomposition& dec, const DesignModel& design);

}  // namespace tcar
