#include "tcar/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tcar {

namespace {

std::string fmt_value(const char* what, double v) {
    std::ostringstream os;
    os << what << " = " << v;
    return os.str();
}

}  // namespace

void VehicleClassParams::validate(const char* label) const {
    auto fail = [&](const char* cond, double v) {
        throw ValidationError(std::string(label) + ": requires " + cond + ", got " + fmt_value("value", v));
    };
    if (!(tau > 0.0)) fail("tau > 0", tau);
    if (!(gamma > 1.0)) fail("gamma > 1", gamma);
    if (!(v_free > 0.0)) fail("v_free > 0", v_free);
    if (!(ao_max > 0.0 && ao_max <= 1.0)) fail("0 < ao_max <= 1", ao_max);
    if (!(a > 0.0)) fail("a > 0", a);
}

void RoadParams::validate() const {
    if (!(width > 0.0)) throw ValidationError("road: requires width > 0, got " + fmt_value("width", width));
    if (!(length > 0.0)) throw ValidationError("road: requires length > 0, got " + fmt_value("length", length));
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Free: return "Free";
        case Regime::Congested: return "Congested";
        case Regime::Boundary: return "Boundary";
    }
    return "?";
}

double area_occupancy(double rho1, double rho2, const RoadParams& road, const TwoClasses& classes) {
    if (rho1 < 0.0 || rho2 < 0.0)
        throw ValidationError("area_occupancy: densities must be non-negative, got " +
                              fmt_value("rho1", rho1) + ", " + fmt_value("rho2", rho2));
    return (classes[0].a * rho1 + classes[1].a * rho2) / road.width;
}

double pressure(double ao, const VehicleClassParams& cls) {
    if (ao < 0.0) throw ValidationError("pressure: requires ao >= 0, got " + fmt_value("ao", ao));
    return cls.v_free * std::pow(ao / cls.ao_max, cls.gamma);
}

double equilibrium_speed(double ao, const VehicleClassParams& cls) {
    return cls.v_free - pressure(ao, cls);
}

EquilibriumState compute_equilibrium(const std::array<double, 2>& rho_star, const RoadParams& road,
                                     const TwoClasses& classes) {
    if (!(rho_star[0] > 0.0) || !(rho_star[1] > 0.0))
        throw InfeasibleEquilibrium("compute_equilibrium: densities must be positive, got " +
                                    fmt_value("rho1*", rho_star[0]) + ", " + fmt_value("rho2*", rho_star[1]));
    const double ao = area_occupancy(rho_star[0], rho_star[1], road, classes);
    if (ao > 1.0)
        throw InfeasibleEquilibrium("compute_equilibrium: area occupancy exceeds 1, got " + fmt_value("AO", ao));
    EquilibriumState eq;
    eq.rho_star = rho_star;
    eq.ao_star = ao;
    for (int i = 0; i < 2; ++i) {
        eq.v_star[i] = equilibrium_speed(ao, classes[i]);
        if (!(eq.v_star[i] > 0.0))
            throw InfeasibleEquilibrium("compute_equilibrium: equilibrium speed of class " +
                                        std::to_string(i + 1) + " must be positive, got " +
                                        fmt_value("v*", eq.v_star[i]));
        eq.q_star[i] = eq.rho_star[i] * eq.v_star[i];
    }
    return eq;
}

Eigen::Matrix2d pressure_gradients(const EquilibriumState& eq, const RoadParams& road,
                                   const TwoClasses& classes) {
    Eigen::Matrix2d beta;
    for (int i = 0; i < 2; ++i) {
        const VehicleClassParams& c = classes[i];
        const double common =
            c.gamma * c.v_free * std::pow(eq.ao_star, c.gamma - 1.0) / (road.width * std::pow(c.ao_max, c.gamma));
        for (int j = 0; j < 2; ++j) beta(i, j) = common * classes[j].a;
    }
    return beta;
}

Regime classify_regime(const std::array<double, 4>& lambdas, double tol) {
    for (int i = 0; i < 3; ++i) {
        if (lambdas[i] <= tol)
            throw DegenerateRegime("classify_regime: lambda_" + std::to_string(i + 1) +
                                   " must exceed tolerance, got " + fmt_value("lambda", lambdas[i]));
    }
    const double l4 = lambdas[3];
    if (std::abs(l4) <= tol) return Regime::Boundary;
    return l4 > 0.0 ? Regime::Free : Regime::Congested;
}

Linearization linearize(const EquilibriumState& eq, const Eigen::Matrix2d& beta,
                        const TwoClasses& classes, double regime_tol) {
    Linearization lin;
    lin.beta = beta;
    lin.alpha = {beta(0, 0), beta(1, 1)};

    const double r1 = eq.rho_star[0], r2 = eq.rho_star[1];
    const double v1 = eq.v_star[0], v2 = eq.v_star[1];

    lin.jac_x << v1, r1, 0, 0,
        0, v1 - beta(0, 0) * r1, beta(0, 1) * (v1 - v2), -beta(0, 1) * r2,
        0, 0, v2, r2,
        beta(1, 0) * (v2 - v1), -beta(1, 0) * r1, 0, v2 - beta(1, 1) * r2;

    const double it1 = 1.0 / classes[0].tau, it2 = 1.0 / classes[1].tau;
    lin.jac_src << 0, 0, 0, 0,
        -beta(0, 0) * it1, -it1, -beta(0, 1) * it1, 0,
        0, 0, 0, 0,
        -beta(1, 0) * it2, 0, -beta(1, 1) * it2, -it2;

    const double a1r1 = lin.alpha[0] * r1, a2r2 = lin.alpha[1] * r2;
    lin.delta = std::sqrt((a2r2 - a1r1 + v1 - v2) * (a2r2 - a1r1 + v1 - v2) + 4.0 * a1r1 * a2r2);
    const double s = v1 + v2 - a1r1 - a2r2;
    lin.lambdas = {v1, v2, 0.5 * (s + lin.delta), 0.5 * (s - lin.delta)};
    lin.regime = classify_regime(lin.lambdas, regime_tol);
    return lin;
}

RegimeScan congestion_boundary_scan(const RoadParams& road, const TwoClasses& classes,
                                    std::pair<double, double> rho1_range,
                                    std::pair<double, double> rho2_range, int resolution) {
    if (resolution < 2)
        throw ValidationError("congestion_boundary_scan: requires resolution >= 2, got " +
                              std::to_string(resolution));
    if (!(rho1_range.second > rho1_range.first) || !(rho2_range.second > rho2_range.first))
        throw ValidationError("congestion_boundary_scan: ranges must be increasing");

    const int n = resolution;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    RegimeScan scan;
    scan.rho1.resize(n);
    scan.rho2.resize(n);
    scan.lambda4.assign(static_cast<size_t>(n) * n, nan);
    for (int i = 0; i < n; ++i)
        scan.rho1[i] = rho1_range.first + (rho1_range.second - rho1_range.first) * i / (n - 1);
    for (int j = 0; j < n; ++j)
        scan.rho2[j] = rho2_range.first + (rho2_range.second - rho2_range.first) * j / (n - 1);

    const double ao_cap = std::min(classes[0].ao_max, classes[1].ao_max);
    auto lambda4_at = [&](double rho1, double rho2) -> double {
        if (rho1 <= 0.0 || rho2 <= 0.0) return nan;
        const double ao = area_occupancy(rho1, rho2, road, classes);
        if (ao >= ao_cap) return nan;
        std::array<double, 2> rho{rho1, rho2};
        EquilibriumState eq;
        try {
            eq = compute_equilibrium(rho, road, classes);
        } catch (const InfeasibleEquilibrium&) {
            return nan;
        }
        const Eigen::Matrix2d beta = pressure_gradients(eq, road, classes);
        const double a1r1 = beta(0, 0) * rho1, a2r2 = beta(1, 1) * rho2;
        const double v1 = eq.v_star[0], v2 = eq.v_star[1];
        const double delta = std::sqrt((a2r2 - a1r1 + v1 - v2) * (a2r2 - a1r1 + v1 - v2) + 4.0 * a1r1 * a2r2);
        return 0.5 * (v1 + v2 - a1r1 - a2r2 - delta);
    };

    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scan.lambda4[static_cast<size_t>(i) * n + j] = lambda4_at(scan.rho1[i], scan.rho2[j]);

    auto val = [&](int i, int j) { return scan.lambda4[static_cast<size_t>(i) * n + j]; };

    // Vertex tolerance from the largest observed second difference of the sampled
    // surface; edge interpolation error is bounded by one eighth of it.
    double d2max = 0.0;
    for (int i = 1; i + 1 < n; ++i) {
        for (int j = 1; j + 1 < n; ++j) {
            const double c = val(i, j);
            const double xm = val(i - 1, j), xp = val(i + 1, j);
            const double ym = val(i, j - 1), yp = val(i, j + 1);
            if (std::isfinite(c) && std::isfinite(xm) && std::isfinite(xp) && std::isfinite(ym) &&
                std::isfinite(yp))
                d2max = std::max(d2max, std::abs(xp - 2 * c + xm) + std::abs(yp - 2 * c + ym));
        }
    }
    scan.tolerance = std::max(0.5 * d2max, 1e-9);

    // Marching-squares edge crossings, then greedy chaining into polylines.
    struct Seg {
        RegimeScan::Vertex a, b;
        bool used = false;
    };
    auto edge_zero = [&](double ra, double rb, double fa, double fb, double sa, double sb, bool along_rho1,
                         RegimeScan::Vertex& out) -> bool {
        if (!std::isfinite(fa) || !std::isfinite(fb)) return false;
        if ((fa > 0.0) == (fb > 0.0)) return false;
        const double t = fa / (fa - fb);
        if (along_rho1) {
            out.rho1 = ra + t * (rb - ra);
            out.rho2 = sa;
        } else {
            out.rho1 = sa;
            out.rho2 = ra + t * (rb - ra);
        }
        (void)sb;
        out.lambda4 = lambda4_at(out.rho1, out.rho2);
        return std::isfinite(out.lambda4);
    };

    std::vector<Seg> segs;
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            const double f00 = val(i, j), f10 = val(i + 1, j), f01 = val(i, j + 1), f11 = val(i + 1, j + 1);
            std::vector<RegimeScan::Vertex> hits;
            RegimeScan::Vertex v;
            if (edge_zero(scan.rho1[i], scan.rho1[i + 1], f00, f10, scan.rho2[j], 0, true, v)) hits.push_back(v);
            if (edge_zero(scan.rho2[j], scan.rho2[j + 1], f10, f11, scan.rho1[i + 1], 0, false, v)) hits.push_back(v);
            if (edge_zero(scan.rho1[i], scan.rho1[i + 1], f01, f11, scan.rho2[j + 1], 0, true, v)) hits.push_back(v);
            if (edge_zero(scan.rho2[j], scan.rho2[j + 1], f00, f01, scan.rho1[i], 0, false, v)) hits.push_back(v);
            if (hits.size() == 2) segs.push_back({hits[0], hits[1], false});
            // Saddle cells (4 crossings) are split arbitrarily but deterministically.
            if (hits.size() == 4) {
                segs.push_back({hits[0], hits[1], false});
                segs.push_back({hits[2], hits[3], false});
            }
        }
    }

    const double eps1 = 1e-9 * (rho1_range.second - rho1_range.first);
    const double eps2 = 1e-9 * (rho2_range.second - rho2_range.first);
    auto same = [&](const RegimeScan::Vertex& p, const RegimeScan::Vertex& q) {
        return std::abs(p.rho1 - q.rho1) <= eps1 && std::abs(p.rho2 - q.rho2) <= eps2;
    };
    for (size_t s0 = 0; s0 < segs.size(); ++s0) {
        if (segs[s0].used) continue;
        segs[s0].used = true;
        std::vector<RegimeScan::Vertex> line{segs[s0].a, segs[s0].b};
        bool grew = true;
        while (grew) {
            grew = false;
            for (auto& sg : segs) {
                if (sg.used) continue;
                if (same(line.back(), sg.a)) {
                    line.push_back(sg.b);
                } else if (same(line.back(), sg.b)) {
                    line.push_back(sg.a);
                } else if (same(line.front(), sg.a)) {
                    line.insert(line.begin(), sg.b);
                } else if (same(line.front(), sg.b)) {
                    line.insert(line.begin(), sg.a);
                } else {
                    continue;
                }
                sg.used = true;
                grew = true;
            }
        }
        scan.contours.push_back(std::move(line));
    }
    return scan;
}

}  // namespace tcar
