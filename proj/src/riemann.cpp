#include "tcar/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tcar/errors.hpp"

namespace tcar {

namespace {

constexpr int kPerm[4] = {1, 2, 0, 3};  // design slot -> eigen column

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

SpectralDecomposition finish(Eigen::Matrix4d V, const Linearization& lin, const EquilibriumState& eq) {
    SpectralDecomposition dec;
    dec.V = V;
    dec.V_inv = V.inverse();

    const double id_err = (dec.V * dec.V_inv - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff();
    if (!(id_err < 1e-10))
        throw NearDefectiveEigenbasis("diagonalize: eigenbasis inversion defect " + fmt(id_err));

    Eigen::Vector4d lam;
    for (int i = 0; i < 4; ++i) lam(i) = lin.lambdas[i];
    const double diag_err =
        (dec.V_inv * lin.jac_x * dec.V - Eigen::Matrix4d(lam.asDiagonal())).cwiseAbs().maxCoeff();
    const double scale = lin.jac_x.cwiseAbs().maxCoeff();
    if (!(diag_err < 1e-9 * scale))
        throw NearDefectiveEigenbasis("diagonalize: diagonalization residual " + fmt(diag_err) +
                                      " exceeds 1e-9 * " + fmt(scale));

    dec.J_hat = dec.V_inv * lin.jac_src * dec.V;

    // Outlet flow perturbation weights: q1~ + q2~ expressed per eigendirection.
    Eigen::RowVector4d flow_row;
    flow_row << eq.v_star[0], eq.rho_star[0], eq.v_star[1], eq.rho_star[1];
    dec.kappa = (flow_row * dec.V).transpose();

    const double kappa_scale = dec.kappa.cwiseAbs().maxCoeff();
    if (!(std::abs(dec.kappa(3)) > 1e-10 * kappa_scale))
        throw SingularKappa4("diagonalize: outlet weight of the leftward eigendirection is " +
                             fmt(dec.kappa(3)) + ", cannot invert the input map");

    // Inlet conditions (density of each class and total flow vanish) pin the
    // three rightward amplitudes to the leftward one.
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
    for (int c = 0; c < 3; ++c) {
        A(0, c) = dec.V(0, c);
        A(1, c) = dec.V(2, c);
        A(2, c) = dec.kappa(c);
    }
    b << dec.V(0, 3), dec.V(2, 3), dec.kappa(3);
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (!lu.isInvertible())
        throw SingularInletSystem("diagonalize: inlet condition system is singular, rcond " +
                                  fmt(lu.rcond()));
    dec.Q0_hat = lu.solve(-b);

    dec.R1_hat = -dec.kappa.head<3>().transpose() / dec.kappa(3);
    return dec;
}

}  // namespace

SpectralDecomposition diagonalize(const Linearization& lin, const EquilibriumState& eq) {
    if (lin.regime != Regime::Congested)
        throw DegenerateRegime(std::string("diagonalize: congested regime required, equilibrium is ") +
                               regime_name(lin.regime));

    double max_abs = 0.0;
    for (double l : lin.lambdas) max_abs = std::max(max_abs, std::abs(l));
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (!(std::abs(lin.lambdas[i] - lin.lambdas[j]) > 1e-6 * max_abs))
                throw NearDefectiveEigenbasis("diagonalize: characteristic speeds " + fmt(lin.lambdas[i]) +
                                              " and " + fmt(lin.lambdas[j]) + " are too close");

    Eigen::EigenSolver<Eigen::Matrix4d> es(lin.jac_x);
    if (es.info() != Eigen::Success)
        throw NearDefectiveEigenbasis("diagonalize: eigensolver failed to converge");

    // Match numerical eigenpairs to the closed-form speeds, which fix the
    // column order (v1*, v2*, lambda3, lambda4).
    Eigen::Matrix4d V;
    std::array<bool, 4> used{};
    for (int i = 0; i < 4; ++i) {
        int best = -1;
        double best_d = 0.0;
        for (int k = 0; k < 4; ++k) {
            if (used[k]) continue;
            const double d = std::abs(es.eigenvalues()(k) - std::complex<double>(lin.lambdas[i], 0.0));
            if (best < 0 || d < best_d) {
                best = k;
                best_d = d;
            }
        }
        if (best < 0 || !(best_d < 1e-6 * max_abs))
            throw NearDefectiveEigenbasis("diagonalize: no numerical eigenvalue matches " +
                                          fmt(lin.lambdas[i]) + " (closest off by " + fmt(best_d) + ")");
        used[best] = true;
        const Eigen::Vector4cd col = es.eigenvectors().col(best);
        if (!(col.imag().norm() < 1e-9 * col.norm()))
            throw NearDefectiveEigenbasis("diagonalize: complex eigenvector for speed " +
                                          fmt(lin.lambdas[i]));
        V.col(i) = col.real();
    }

    // Deterministic gauge: unit columns, largest-magnitude entry positive.
    for (int i = 0; i < 4; ++i) {
        V.col(i).normalize();
        int arg = 0;
        V.col(i).cwiseAbs().maxCoeff(&arg);
        if (V(arg, i) < 0.0) V.col(i) = -V.col(i);
    }

    return finish(V, lin, eq);
}

SpectralDecomposition rescale_gauge(const SpectralDecomposition& dec, const Linearization& lin,
                                    const EquilibriumState& eq, const Eigen::Vector4d& scale) {
    for (int i = 0; i < 4; ++i)
        if (!(scale(i) > 0.0))
            throw ValidationError("rescale_gauge: requires positive scales, got " + fmt(scale(i)));
    Eigen::Matrix4d V = dec.V;
    for (int i = 0; i < 4; ++i) V.col(i) *= scale(i);
    return finish(V, lin, eq);
}

DesignModel build_design_model(const SpectralDecomposition& dec, const Linearization& lin,
                               const RoadParams& road) {
    DesignModel d;
    const double v1 = lin.lambdas[0], v2 = lin.lambdas[1];
    const double l3 = lin.lambdas[2], l4 = lin.lambdas[3];
    if (!(v1 > v2))
        throw OrderingViolation("build_design_model: class 1 must be faster, got v1* = " + fmt(v1) +
                                ", v2* = " + fmt(v2));
    if (!(l4 < 0.0))
        throw DegenerateRegime("build_design_model: leftward speed must be negative, got " + fmt(l4));
    if (!(v2 < l3 && l3 < v1))
        throw OrderingViolation("build_design_model: rightward speeds not ascending: " + fmt(v2) + ", " +
                                fmt(l3) + ", " + fmt(v1));

    d.lambda_plus << v2, l3, v1;
    d.lambda_minus = -l4;
    d.length = road.length;

    const std::array<double, 4> slot_speed{v2, l3, v1, l4};
    for (int a = 0; a < 4; ++a) d.rate[a] = dec.J_hat(kPerm[a], kPerm[a]) / slot_speed[a];

    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            d.cpp(a, b) = a == b ? 0.0 : dec.J_hat(kPerm[a], kPerm[b]);
            d.dpp(a, b) = a == b ? 0.0 : d.rate[b] - d.rate[a];
        }
        d.cpm(a) = dec.J_hat(kPerm[a], 3);
        d.dpm(a) = d.rate[3] - d.rate[a];
        d.cmp(a) = dec.J_hat(3, kPerm[a]);
        d.dmp(a) = d.rate[a] - d.rate[3];
    }

    d.Q0_bar << dec.Q0_hat(kPerm[0]), dec.Q0_hat(kPerm[1]), dec.Q0_hat(kPerm[2]);
    for (int a = 0; a < 3; ++a)
        d.R1_bar(a) = dec.R1_hat(kPerm[a]) * std::exp((d.rate[a] - d.rate[3]) * d.length);
    return d;
}

Eigen::Matrix4d CombinedTransform::T(double x) const {
    Eigen::Matrix4d t;
    for (int a = 0; a < 4; ++a) t.col(a) = V.col(kPerm[a]) * std::exp(rate[a] * x);
    return t;
}

Eigen::Matrix4d CombinedTransform::T_inv(double x) const {
    Eigen::Matrix4d t;
    for (int a = 0; a < 4; ++a) t.row(a) = V_inv.row(kPerm[a]) * std::exp(-rate[a] * x);
    return t;
}

Eigen::Matrix<double, 3, 4> CombinedTransform::T_u_inv(double x) const {
    Eigen::Matrix<double, 3, 4> t;
    for (int a = 0; a < 3; ++a) t.row(a) = V_inv.row(kPerm[a]) * std::exp(-rate[a] * x);
    return t;
}

Eigen::RowVector4d CombinedTransform::T_l_inv(double x) const {
    return V_inv.row(3) * std::exp(-rate[3] * x);
}

CombinedTransform build_transform(const SpectralDecomposition& dec, const DesignModel& design) {
    CombinedTransform t;
    t.V = dec.V;
    t.V_inv = dec.V_inv;
    t.rate = design.rate;
    t.length = design.length;
    t.kappa4 = dec.kappa(3);
    t.gain = t.kappa4 * std::exp(design.rate[3] * design.length);
    return t;
}

}  // namespace tcar
