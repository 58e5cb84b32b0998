#include "tcar/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tcar/errors.hpp"

namespace tcar {

namespace {

// Clamps smaller than this fraction of L are characteristic-endpoint roundoff
// and not worth logging.
constexpr double kClampLogFrac = 1e-9;

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NoConvergence(std::string(what) + ": non-finite kernel value", 0, v);
}

}  // namespace

double TriField::interp(double x, double xi) const {
    const double L = grid_.length, h = grid_.h;
    double cx = std::clamp(x, 0.0, L);
    double cxi = std::clamp(xi, 0.0, L);
    if (cxi > cx) cxi = cx;
    if (std::abs(cx - x) > kClampLogFrac * L || std::abs(cxi - xi) > kClampLogFrac * L) ++clamps_;

    int i = std::min(static_cast<int>(cx / h), grid_.n - 2);
    int j = std::min(static_cast<int>(cxi / h), grid_.n - 2);
    if (j > i) j = i;
    const double u = cx / h - i;
    double v = cxi / h - j;

    if (j == i) {
        // Diagonal cell: linear on the triangle (i,i), (i+1,i), (i+1,i+1).
        if (v > u) v = u;
        return at(i, j) * (1.0 - u) + at(i + 1, j) * (u - v) + at(i + 1, j + 1) * v;
    }
    const double f00 = at(i, j), f10 = at(i + 1, j);
    const double f01 = at(i, j + 1), f11 = at(i + 1, j + 1);
    return f00 * (1 - u) * (1 - v) + f10 * u * (1 - v) + f01 * (1 - u) * v + f11 * u * v;
}

double TriField::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

KernelProblem make_kernel_problem(const DesignModel& design) {
    KernelProblem p;
    p.lambda_plus = design.lambda_plus;
    p.lambda_minus = design.lambda_minus;
    p.length = design.length;
    p.cpp = design.cpp;
    p.dpp = design.dpp;
    p.cpm = design.cpm;
    p.dpm = design.dpm;
    p.cmp = design.cmp;
    p.dmp = design.dmp;
    p.Q0_bar = design.Q0_bar;
    p.R1_bar = design.R1_bar;
    return p;
}

KernelProblem swap_problem(const KernelProblem& p) {
    // Involution mapping the observer kernel system onto the controller one
    // via (x, xi) -> (L - xi, L - x): coefficients reflect and transpose, the
    // outlet reflection becomes an inlet reflection weighted by the speed
    // ratios. Controller kernels of the swapped problem reproduce observer
    // kernels of the original as K'_a(x,xi) = m_a(L-xi, L-x) and
    // L11'(x,xi) = -N11(L-xi, L-x).
    const double L = p.length, l4 = p.lambda4();
    KernelProblem s = p;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            s.cpp(a, b) = p.cpp(b, a) * std::exp(p.dpp(b, a) * L);
            s.dpp(a, b) = -p.dpp(b, a);
        }
        s.cmp(a) = -p.cpm(a) * std::exp(p.dpm(a) * L);
        s.dmp(a) = -p.dpm(a);
        s.cpm(a) = -p.cmp(a) * std::exp(p.dmp(a) * L);
        s.dpm(a) = -p.dmp(a);
        s.Q0_bar(a) = l4 * p.R1_bar(a) / p.lambda_plus(a);
        s.R1_bar(a) = p.lambda_plus(a) * p.Q0_bar(a) / l4;
    }
    return s;
}

namespace {

struct ControllerWork {
    const KernelProblem& p;
    TriangularGrid grid;
    double l4;

    explicit ControllerWork(const KernelProblem& pp, int n) : p(pp), grid(n, pp.length), l4(pp.lambda4()) {}

    double diag_value(int a, double x) const {
        return p.sigma_mp_at(a, x) / (l4 - p.lambda_plus(a));
    }

    // Base relation ties L11(x,0) to K(x,0).
    double base_value(const std::array<TriField, 3>& k, int i) const {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += p.lambda_plus(a) * p.Q0_bar(a) * k[a].at(i, 0);
        return -s / l4;
    }

    // Cumulative integration of the L11 transport equation along the 45 degree
    // characteristics, seeded on the base edge.
    void build_l11(const std::array<TriField, 3>& k, TriField& l11) const {
        const int n = grid.n;
        const double h = grid.h;
        auto g = [&](int i, int j) {
            double s = 0.0;
            const double xi = grid.x(j);
            for (int a = 0; a < 3; ++a) s += k[a].at(i, j) * p.sigma_pm_at(a, xi);
            return -s / l4;
        };
        for (int i = 0; i < n; ++i) l11.at(i, 0) = base_value(k, i);
        for (int j = 1; j < n; ++j)
            for (int i = j; i < n; ++i)
                l11.at(i, j) = l11.at(i - 1, j - 1) + 0.5 * h * (g(i, j) + g(i - 1, j - 1));
    }

    // One Picard value for K_a at node (i,j): integrate the characteristic
    // from its diagonal foot using the previous iterate's fields.
    double k_update(int a, int i, int j, const std::array<TriField, 3>& k, const TriField& l11) const {
        const double x0 = grid.x(i), xi0 = grid.x(j);
        const double lp = p.lambda_plus(a);
        const double xid = (lp * x0 - l4 * xi0) / (lp - l4);
        const double len = xid - xi0;
        const int m = std::max(2, static_cast<int>(std::ceil(len / grid.h)) + 1);
        const double dxi = len / (m - 1);
        double integral = 0.0, prev = 0.0;
        for (int q = 0; q < m; ++q) {
            const double xi = xi0 + q * dxi;
            const double x = x0 + (l4 / lp) * (xi - xi0);
            double rhs = 0.0;
            for (int b = 0; b < 3; ++b) {
                if (b == a && p.cpp(b, a) == 0.0) continue;
                rhs -= k[b].interp(x, xi) * p.sigma_pp_at(b, a, xi);
            }
            rhs -= l11.interp(x, xi) * p.sigma_mp_at(a, xi);
            const double f = rhs / lp;
            if (q > 0) integral += 0.5 * dxi * (prev + f);
            prev = f;
        }
        return diag_value(a, xid) - integral;
    }
};

struct ObserverWork {
    const KernelProblem& p;
    TriangularGrid grid;
    double l4;

    explicit ObserverWork(const KernelProblem& pp, int n) : p(pp), grid(n, pp.length), l4(pp.lambda4()) {}

    double diag_value(int a, double x) const {
        return p.sigma_pm_at(a, x) / (p.lambda_plus(a) - l4);
    }

    double top_value(const std::array<TriField, 3>& m, int j) const {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += p.R1_bar(a) * m[a].at(grid.n - 1, j);
        return s;
    }

    // Cumulative integration of the N11 transport equation along the 45 degree
    // characteristics, seeded on the top edge x = L and marched downward.
    void build_n11(const std::array<TriField, 3>& m, TriField& n11) const {
        const int n = grid.n;
        const double h = grid.h;
        auto q = [&](int i, int j) {
            double s = 0.0;
            const double x = grid.x(i);
            for (int a = 0; a < 3; ++a) s += p.sigma_mp_at(a, x) * m[a].at(i, j);
            return s / l4;
        };
        for (int j = 0; j < n; ++j) n11.at(n - 1, j) = top_value(m, j);
        for (int i = n - 2; i >= 0; --i)
            for (int j = 0; j <= i; ++j)
                n11.at(i, j) = n11.at(i + 1, j + 1) - 0.5 * h * (q(i, j) + q(i + 1, j + 1));
    }

    double m_update(int a, int i, int j, const std::array<TriField, 3>& m, const TriField& n11) const {
        const double x0 = grid.x(i), xi0 = grid.x(j);
        const double lp = p.lambda_plus(a);
        const double xd = (lp * xi0 - l4 * x0) / (lp - l4);
        const double len = x0 - xd;
        const int cnt = std::max(2, static_cast<int>(std::ceil(len / grid.h)) + 1);
        const double dx = len / (cnt - 1);
        double integral = 0.0, prev = 0.0;
        for (int q = 0; q < cnt; ++q) {
            const double x = xd + q * dx;
            const double xi = xi0 + (l4 / lp) * (x - x0);
            double rhs = 0.0;
            for (int b = 0; b < 3; ++b) {
                if (b == a && p.cpp(a, b) == 0.0) continue;
                rhs += p.sigma_pp_at(a, b, x) * m[b].interp(x, xi);
            }
            rhs += p.sigma_pm_at(a, x) * n11.interp(x, xi);
            const double f = rhs / lp;
            if (q > 0) integral += 0.5 * dx * (prev + f);
            prev = f;
        }
        return diag_value(a, xd) + integral;
    }
};

std::uint64_t drain_clamps(std::array<TriField, 3>& k, TriField& extra) {
    std::uint64_t total = extra.clamp_count();
    extra.reset_clamp_count();
    for (auto& f : k) {
        total += f.clamp_count();
        f.reset_clamp_count();
    }
    return total;
}

}  // namespace

ControllerKernels solve_controller_kernels(const KernelProblem& p, const SolveOptions& opt) {
    if (opt.grid_n < 3) throw ValidationError("solve_controller_kernels: requires grid_n >= 3");
    ControllerWork w(p, opt.grid_n);
    const int n = w.grid.n;

    ControllerKernels out;
    out.grid = w.grid;
    for (auto& f : out.k) f = TriField(w.grid);
    out.l11 = TriField(w.grid);

    // Zeroth iterate: pure boundary term, integral dropped.
    for (int a = 0; a < 3; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                const double x0 = w.grid.x(i), xi0 = w.grid.x(j);
                const double lp = p.lambda_plus(a);
                out.k[a].at(i, j) = w.diag_value(a, (lp * x0 - w.l4 * xi0) / (lp - w.l4));
            }

    std::array<TriField, 3> next = out.k;
    std::uint64_t clamps = 0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        w.build_l11(out.k, out.l11);
        double change = 0.0;
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < i; ++j) {
                    const double v = w.k_update(a, i, j, out.k, out.l11);
                    check_finite(v, "solve_controller_kernels");
                    change = std::max(change, std::abs(v - out.k[a].at(i, j)));
                    next[a].at(i, j) = v;
                }
                next[a].at(i, i) = w.diag_value(a, w.grid.x(i));
            }
        }
        clamps += drain_clamps(out.k, out.l11);
        out.k = next;
        out.iterations = it;
        out.final_change = change;
        if (change <= opt.tolerance) {
            w.build_l11(out.k, out.l11);
            out.clamp_count = clamps;
            return out;
        }
    }
    std::ostringstream os;
    os << "solve_controller_kernels: no convergence after " << opt.max_iterations
       << " iterations, last change " << out.final_change;
    throw NoConvergence(os.str(), opt.max_iterations, out.final_change);
}

ControllerKernels solve_controller_kernels(const DesignModel& design, const SolveOptions& opt) {
    return solve_controller_kernels(make_kernel_problem(design), opt);
}

ObserverKernels solve_observer_kernels(const KernelProblem& p, const SolveOptions& opt) {
    if (opt.grid_n < 3) throw ValidationError("solve_observer_kernels: requires grid_n >= 3");
    ObserverWork w(p, opt.grid_n);
    const int n = w.grid.n;

    ObserverKernels out;
    out.grid = w.grid;
    for (auto& f : out.m) f = TriField(w.grid);
    out.n11 = TriField(w.grid);

    for (int a = 0; a < 3; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                const double x0 = w.grid.x(i), xi0 = w.grid.x(j);
                const double lp = p.lambda_plus(a);
                out.m[a].at(i, j) = w.diag_value(a, (lp * xi0 - w.l4 * x0) / (lp - w.l4));
            }

    std::array<TriField, 3> next = out.m;
    std::uint64_t clamps = 0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        w.build_n11(out.m, out.n11);
        double change = 0.0;
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < i; ++j) {
                    const double v = w.m_update(a, i, j, out.m, out.n11);
                    check_finite(v, "solve_observer_kernels");
                    change = std::max(change, std::abs(v - out.m[a].at(i, j)));
                    next[a].at(i, j) = v;
                }
                next[a].at(i, i) = w.diag_value(a, w.grid.x(i));
            }
        }
        clamps += drain_clamps(out.m, out.n11);
        out.m = next;
        out.iterations = it;
        out.final_change = change;
        if (change <= opt.tolerance) {
            w.build_n11(out.m, out.n11);
            out.clamp_count = clamps;
            const double l4 = w.l4;
            for (int a = 0; a < 3; ++a) {
                out.p_plus[a].resize(n);
                for (int i = 0; i < n; ++i) out.p_plus[a][i] = -l4 * out.m[a].at(i, 0);
            }
            out.p11_minus.resize(n);
            for (int i = 0; i < n; ++i) out.p11_minus[i] = -l4 * out.n11.at(i, 0);
            return out;
        }
    }
    std::ostringstream os;
    os << "solve_observer_kernels: no convergence after " << opt.max_iterations
       << " iterations, last change " << out.final_change;
    throw NoConvergence(os.str(), opt.max_iterations, out.final_change);
}

ObserverKernels solve_observer_kernels(const DesignModel& design, const SolveOptions& opt) {
    return solve_observer_kernels(make_kernel_problem(design), opt);
}

ControllerResiduals kernel_residual(const ControllerKernels& kk, const KernelProblem& p) {
    ControllerResiduals r;
    const TriangularGrid& g = kk.grid;
    const double h = g.h, l4 = -p.lambda_minus;
    // One-sided backward differences in both directions: independent of the
    // characteristic construction, so the defect measures real scheme error.
    for (int i = 1; i < g.n; ++i) {
        for (int j = 1; j < i; ++j) {
            const double xi = g.x(j);
            for (int a = 0; a < 3; ++a) {
                const double kx = (kk.k[a].at(i, j) - kk.k[a].at(i - 1, j)) / h;
                const double kxi = (kk.k[a].at(i, j) - kk.k[a].at(i, j - 1)) / h;
                double rhs = 0.0;
                for (int b = 0; b < 3; ++b) rhs -= kk.k[b].at(i, j) * p.sigma_pp_at(b, a, xi);
                rhs -= kk.l11.at(i, j) * p.sigma_mp_at(a, xi);
                r.pde_k = std::max(r.pde_k, std::abs(l4 * kx + p.lambda_plus(a) * kxi - rhs));
            }
            const double lx = (kk.l11.at(i, j) - kk.l11.at(i - 1, j)) / h;
            const double lxi = (kk.l11.at(i, j) - kk.l11.at(i, j - 1)) / h;
            double rhs = 0.0;
            for (int a = 0; a < 3; ++a) rhs -= kk.k[a].at(i, j) * p.sigma_pm_at(a, xi);
            r.pde_l11 = std::max(r.pde_l11, std::abs(l4 * (lx + lxi) - rhs));
        }
    }
    for (int i = 0; i < g.n; ++i) {
        double s = l4 * kk.l11.at(i, 0);
        for (int a = 0; a < 3; ++a) s += p.lambda_plus(a) * p.Q0_bar(a) * kk.k[a].at(i, 0);
        r.bc_base = std::max(r.bc_base, std::abs(s));
        for (int a = 0; a < 3; ++a) {
            const double want = p.sigma_mp_at(a, g.x(i)) / (l4 - p.lambda_plus(a));
            r.bc_diag = std::max(r.bc_diag, std::abs(kk.k[a].at(i, i) - want));
        }
    }
    return r;
}

ObserverResiduals kernel_residual(const ObserverKernels& ok, const KernelProblem& p) {
    ObserverResiduals r;
    const TriangularGrid& g = ok.grid;
    const double h = g.h, l4 = -p.lambda_minus;
    for (int i = 1; i < g.n; ++i) {
        for (int j = 1; j < i; ++j) {
            const double x = g.x(i);
            for (int a = 0; a < 3; ++a) {
                const double mx = (ok.m[a].at(i, j) - ok.m[a].at(i - 1, j)) / h;
                const double mxi = (ok.m[a].at(i, j) - ok.m[a].at(i, j - 1)) / h;
                double rhs = 0.0;
                for (int b = 0; b < 3; ++b) rhs += p.sigma_pp_at(a, b, x) * ok.m[b].at(i, j);
                rhs += p.sigma_pm_at(a, x) * ok.n11.at(i, j);
                r.pde_m = std::max(r.pde_m, std::abs(l4 * mxi + p.lambda_plus(a) * mx - rhs));
            }
            const double nx = (ok.n11.at(i, j) - ok.n11.at(i - 1, j)) / h;
            const double nxi = (ok.n11.at(i, j) - ok.n11.at(i, j - 1)) / h;
            double rhs = 0.0;
            for (int a = 0; a < 3; ++a) rhs += p.sigma_mp_at(a, x) * ok.m[a].at(i, j);
            r.pde_n11 = std::max(r.pde_n11, std::abs(l4 * (nx + nxi) - rhs));
        }
    }
    for (int i = 0; i < g.n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const double want = p.sigma_pm_at(a, g.x(i)) / (p.lambda_plus(a) - l4);
            r.bc_diag = std::max(r.bc_diag, std::abs(ok.m[a].at(i, i) - want));
        }
    }
    for (int j = 0; j < g.n; ++j) {
        double s = ok.n11.at(g.n - 1, j);
        for (int a = 0; a < 3; ++a) s -= p.R1_bar(a) * ok.m[a].at(g.n - 1, j);
        r.bc_top = std::max(r.bc_top, std::abs(s));
    }
    return r;
}

TargetCoefficients target_coefficients(const ControllerKernels& kk, const ObserverKernels& ok,
                                       const KernelProblem& p, double tol, int max_iter) {
    if (kk.grid.n != ok.grid.n)
        throw GridMismatch("target_coefficients: controller and observer kernel grids differ");
    const TriangularGrid& g = kk.grid;
    const int n = g.n;
    const double h = g.h;

    TargetCoefficients tc;
    tc.grid = g;
    for (int a = 0; a < 3; ++a) {
        tc.c_minus[a] = TriField(g);
        tc.d_minus[a] = TriField(g);
        for (int b = 0; b < 3; ++b) {
            tc.c_plus[a][b] = TriField(g);
            tc.d_plus[a][b] = TriField(g);
        }
    }

    // Node-aligned trapezoid over s in [xi_j, x_i] for a field already sampled
    // at (i, s) and a kernel at (s, j).
    auto volterra = [&](const TriField& row_field, const TriField& col_kernel, int i, int j) {
        double acc = 0.0;
        for (int s = j; s < i; ++s)
            acc += 0.5 * h *
                   (row_field.at(i, s) * col_kernel.at(s, j) +
                    row_field.at(i, s + 1) * col_kernel.at(s + 1, j));
        return acc;
    };

    // C-: Picard on the Volterra equation driven by sigma_pm(x) L11.
    double change = 0.0;
    int it = 0;
    for (it = 1; it <= max_iter; ++it) {
        change = 0.0;
        for (int a = 0; a < 3; ++a) {
            TriField next(g);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j <= i; ++j) {
                    const double v = p.sigma_pm_at(a, g.x(i)) * kk.l11.at(i, j) +
                                     volterra(tc.c_minus[a], kk.l11, i, j);
                    change = std::max(change, std::abs(v - tc.c_minus[a].at(i, j)));
                    next.at(i, j) = v;
                }
            tc.c_minus[a] = next;
        }
        if (change <= tol) break;
    }
    if (change > tol)
        throw NoConvergence("target_coefficients: C- Picard stalled", max_iter, change);

    // D-: same structure driven by -N11 sigma_mp(xi).
    for (it = 1; it <= max_iter; ++it) {
        change = 0.0;
        for (int b = 0; b < 3; ++b) {
            TriField next(g);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j <= i; ++j) {
                    const double v = -ok.n11.at(i, j) * p.sigma_mp_at(b, g.x(j)) +
                                     volterra(ok.n11, tc.d_minus[b], i, j);
                    change = std::max(change, std::abs(v - tc.d_minus[b].at(i, j)));
                    next.at(i, j) = v;
                }
            tc.d_minus[b] = next;
        }
        if (change <= tol) break;
    }
    if (change > tol)
        throw NoConvergence("target_coefficients: D- Picard stalled", max_iter, change);

    // C+ and D+ follow explicitly.
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j <= i; ++j) {
                    tc.c_plus[a][b].at(i, j) = p.sigma_pm_at(a, g.x(i)) * kk.k[b].at(i, j) +
                                               volterra(tc.c_minus[a], kk.k[b], i, j);
                    tc.d_plus[a][b].at(i, j) = -ok.m[a].at(i, j) * p.sigma_mp_at(b, g.x(j)) +
                                               volterra(ok.m[a], tc.d_minus[b], i, j);
                }
    tc.iterations = it;
    tc.final_change = change;
    return tc;
}

}  // namespace tcar
