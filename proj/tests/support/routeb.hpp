#pragma once

// Independent discretization of the controller kernel system in its unreduced
// four-equation form: row-by-row marching with local one-cell characteristic
// steps and Gauss-Seidel updates within a sweep. First order like the
// production solver but with different truncation terms and interpolation
// stencils, so agreement between the two is an O(h) cross check rather than a
// tautology.

#include <algorithm>
#include <array>
#include <cmath>

#include "tcar/kernels.hpp"

namespace routeb {

struct Fields {
    tcar::TriangularGrid grid;
    std::array<tcar::TriField, 3> k;
    tcar::TriField l11;
    int iterations = 0;
    double final_change = 0.0;
};

inline Fields solve_controller(const tcar::KernelProblem& p, int n, double tol = 1e-10,
                               int max_iter = 400) {
    Fields out;
    out.grid = tcar::TriangularGrid(n, p.length);
    for (auto& f : out.k) f = tcar::TriField(out.grid);
    out.l11 = tcar::TriField(out.grid);
    const double h = out.grid.h;
    const double l4 = p.lambda4();

    auto diag = [&](int a, double x) { return p.sigma_mp_at(a, x) / (l4 - p.lambda_plus(a)); };
    auto rhs = [&](int a, double xi, const std::array<double, 3>& kv, double lv) {
        double s = 0.0;
        for (int b = 0; b < 3; ++b) s -= kv[b] * p.sigma_pp_at(b, a, xi);
        s -= lv * p.sigma_mp_at(a, xi);
        return s;
    };

    for (int it = 1; it <= max_iter; ++it) {
        const std::array<tcar::TriField, 3> kold = out.k;
        const tcar::TriField lold = out.l11;
        double change = 0.0;

        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) out.k[a].at(i, i) = diag(a, out.grid.x(i));

            for (int j = i - 1; j >= 0; --j) {
                const double x1 = out.grid.x(i), xi1 = out.grid.x(j);
                for (int a = 0; a < 3; ++a) {
                    const double lp = p.lambda_plus(a);
                    const double slope = lp / l4;  // negative
                    const double xi_prev = xi1 + slope * (-h);
                    double x0, xi0, base;
                    std::array<double, 3> kv0;
                    double lv0;
                    if (xi_prev <= out.grid.x(i - 1) + 1e-12 * h) {
                        // Characteristic stays inside the strip: take data from
                        // the already-updated row i-1 by linear interpolation.
                        x0 = out.grid.x(i - 1);
                        xi0 = std::max(0.0, xi_prev);
                        const double t = xi0 / h;
                        int jj = std::clamp(static_cast<int>(t), 0, std::max(0, i - 2));
                        const int jr = std::min(jj + 1, i - 1);
                        const double fr = t - jj;
                        for (int b = 0; b < 3; ++b)
                            kv0[b] = out.k[b].at(i - 1, jj) * (1.0 - fr) + out.k[b].at(i - 1, jr) * fr;
                        lv0 = lold.at(i - 1, jj) * (1.0 - fr) + lold.at(i - 1, jr) * fr;
                        base = kv0[a];
                    } else {
                        // Crossed the diagonal inside the cell: exact data.
                        const double xc = (lp * x1 - l4 * xi1) / (lp - l4);
                        x0 = xc;
                        xi0 = xc;
                        for (int b = 0; b < 3; ++b) kv0[b] = diag(b, xc);
                        const double t = xc / h;
                        const int ii = std::min(static_cast<int>(t), n - 2);
                        const double fr = t - ii;
                        lv0 = lold.at(ii, ii) * (1.0 - fr) + lold.at(ii + 1, ii + 1) * fr;
                        base = kv0[a];
                    }
                    std::array<double, 3> kv1;
                    for (int b = 0; b < 3; ++b) kv1[b] = kold[b].at(i, j);
                    const double lv1 = lold.at(i, j);
                    const double v = base + 0.5 * (x1 - x0) *
                                                (rhs(a, xi0, kv0, lv0) + rhs(a, xi1, kv1, lv1)) / l4;
                    change = std::max(change, std::abs(v - kold[a].at(i, j)));
                    out.k[a].at(i, j) = v;
                }
            }

            double s = 0.0;
            for (int a = 0; a < 3; ++a) s += p.lambda_plus(a) * p.Q0_bar(a) * out.k[a].at(i, 0);
            const double base_v = -s / l4;
            change = std::max(change, std::abs(base_v - lold.at(i, 0)));
            out.l11.at(i, 0) = base_v;

            auto gl = [&](int ii, int jj) {
                double acc = 0.0;
                for (int a = 0; a < 3; ++a)
                    acc += out.k[a].at(ii, jj) * p.sigma_pm_at(a, out.grid.x(jj));
                return -acc / l4;
            };
            for (int j = 1; j <= i; ++j) {
                const double v = out.l11.at(i - 1, j - 1) + 0.5 * h * (gl(i - 1, j - 1) + gl(i, j));
                change = std::max(change, std::abs(v - lold.at(i, j)));
                out.l11.at(i, j) = v;
            }
        }

        out.iterations = it;
        out.final_change = change;
        if (change <= tol) return out;
    }
    throw tcar::NoConvergence("routeb: controller marching did not converge", max_iter,
                              out.final_change);
}

}  // namespace routeb
