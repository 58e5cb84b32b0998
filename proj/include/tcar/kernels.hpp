#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tcar/riemann.hpp"

namespace tcar {

// Uniform grid on the triangle T = {0 <= xi <= x <= L}.
struct TriangularGrid {
    int n = 0;       // nodes per edge
    double h = 0.0;  // spacing, length / (n - 1)
    double length = 0.0;

    TriangularGrid() = default;
    TriangularGrid(int n_, double length_) : n(n_), h(length_ / (n_ - 1)), length(length_) {}
    double x(int i) const { return i * h; }
    int nodes() const { return n * (n + 1) / 2; }
};

// Scalar field sampled at the triangle nodes (i >= j), row-major by i.
class TriField {
public:
    TriField() = default;
    explicit TriField(const TriangularGrid& g) : grid_(g), data_(g.nodes(), 0.0) {}

    double& at(int i, int j) { return data_[offset(i) + j]; }
    double at(int i, int j) const { return data_[offset(i) + j]; }

    // Bilinear in interior square cells, barycentric in cells cut by the
    // diagonal. Queries outside the closed triangle are clamped onto it and
    // counted; callers inspect clamp_count() to audit characteristic roundoff.
    double interp(double x, double xi) const;

    const TriangularGrid& grid() const { return grid_; }
    std::uint64_t clamp_count() const { return clamps_; }
    void reset_clamp_count() const { clamps_ = 0; }

    double max_abs() const;

private:
    static int offset(int i) { return i * (i + 1) / 2; }
    TriangularGrid grid_;
    std::vector<double> data_;
    mutable std::uint64_t clamps_ = 0;
};

// Coefficient bundle for the kernel equations, decoupled from DesignModel so
// synthetic fully-coupled problems can exercise every term. All coupling
// coefficients have the form c * exp(d * x), which the design model produces
// and which is closed under the duality swap.
struct KernelProblem {
    Eigen::Vector3d lambda_plus;
    double lambda_minus = 0.0;  // -lambda4 > 0
    double length = 0.0;
    Eigen::Matrix3d cpp, dpp;
    Eigen::Vector3d cpm, dpm;
    Eigen::RowVector3d cmp, dmp;
    Eigen::Vector3d Q0_bar;
    Eigen::RowVector3d R1_bar;

    double lambda4() const { return -lambda_minus; }
    double sigma_pp_at(int i, int j, double x) const { return cpp(i, j) * std::exp(dpp(i, j) * x); }
    double sigma_pm_at(int i, double x) const { return cpm(i) * std::exp(dpm(i) * x); }
    double sigma_mp_at(int i, double x) const { return cmp(i) * std::exp(dmp(i) * x); }
    Eigen::Matrix3d sigma_pp(double x) const {
        Eigen::Matrix3d s;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s(i, j) = sigma_pp_at(i, j, x);
        return s;
    }
    Eigen::Vector3d sigma_pm(double x) const {
        return cpm.array() * (dpm.array() * x).exp();
    }
    Eigen::RowVector3d sigma_mp(double x) const {
        return cmp.array() * (dmp.array() * x).exp();
    }
};

KernelProblem make_kernel_problem(const DesignModel& design);

// Controller kernels solved on the swapped problem reproduce the observer
// kernels through (x, xi) -> (L - xi, L - x); used as a cross check.
KernelProblem swap_problem(const KernelProblem& p);

struct SolveOptions {
    int grid_n = 101;
    double tolerance = 1e-8;
    int max_iterations = 200;
};

struct ControllerKernels {
    TriangularGrid grid;
    std::array<TriField, 3> k;  // K(x, xi) rows acting on the rightward slots
    TriField l11;               // scalar kernel weighting the leftward slot
    int iterations = 0;
    double final_change = 0.0;
    std::uint64_t clamp_count = 0;
};

struct ObserverKernels {
    TriangularGrid grid;
    std::array<TriField, 3> m;  // M(x, xi) column kernels
    TriField n11;
    std::array<std::vector<double>, 3> p_plus;  // injection gains at the base-edge nodes x_i
    std::vector<double> p11_minus;
    int iterations = 0;
    double final_change = 0.0;
    std::uint64_t clamp_count = 0;
};

ControllerKernels solve_controller_kernels(const KernelProblem& p, const SolveOptions& opt = {});
ControllerKernels solve_controller_kernels(const DesignModel& design, const SolveOptions& opt = {});
ObserverKernels solve_observer_kernels(const KernelProblem& p, const SolveOptions& opt = {});
ObserverKernels solve_observer_kernels(const DesignModel& design, const SolveOptions& opt = {});

// Discrete defects of a converged kernel set: interior PDE residuals by
// one-sided backward differences (first order) plus boundary condition gaps.
struct ControllerResiduals {
    double pde_k = 0.0;    // sup over interior nodes and the three K rows
    double pde_l11 = 0.0;
    double bc_base = 0.0;  // xi = 0 relation tying L11(x, 0) to K(x, 0)
    double bc_diag = 0.0;  // K on the diagonal vs its pinned value
};

struct ObserverResiduals {
    double pde_m = 0.0;
    double pde_n11 = 0.0;
    double bc_diag = 0.0;  // M on the diagonal vs its pinned value
    double bc_top = 0.0;   // N11(L, xi) vs R1_bar * M(L, xi)
};

ControllerResiduals kernel_residual(const ControllerKernels& kk, const KernelProblem& p);
ObserverResiduals kernel_residual(const ObserverKernels& ok, const KernelProblem& p);

// Coefficients of the closed-loop target systems, reconstructed from the
// kernels by Picard iteration on their Volterra equations. Verification only;
// the control law never evaluates them.
struct TargetCoefficients {
    TriangularGrid grid;
    std::array<std::array<TriField, 3>, 3> c_plus;  // 3x3 field, [row][col]
    std::array<TriField, 3> c_minus;                // 3x1 column field
    std::array<std::array<TriField, 3>, 3> d_plus;  // 3x3 field
    std::array<TriField, 3> d_minus;                // 1x3 row field
    int iterations = 0;
    double final_change = 0.0;
};

TargetCoefficients target_coefficients(const ControllerKernels& kk, const ObserverKernels& ok,
                                       const KernelProblem& p, double tol = 1e-10, int max_iter = 200);

}  // namespace tcar
