#include "tcar/csvio.hpp"

#include <cstdio>
#include <fstream>

#include "tcar/errors.hpp"

namespace tcar {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("write: cannot open \"" + tmp + "\"");
        out << content;
        out.flush();
        if (!out) throw Error("write: failed writing \"" + tmp + "\"");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("write: cannot rename \"" + tmp + "\" to \"" + path + "\"");
}

namespace {

void append_row(std::string& out, const double* vals, int n) {
    for (int k = 0; k < n; ++k) {
        if (k) out += ',';
        out += format_double(vals[k]);
    }
    out += '\n';
}

}  // namespace

std::string snapshots_csv(const Trajectory& traj, const SpaceGrid& grid,
                          const EquilibriumState& eq) {
    std::string out = "t,x,rho1,v1,rho2,v2,w1,w2,w3,w4\n";
    const double base[4] = {eq.rho_star[0], eq.v_star[0], eq.rho_star[1], eq.v_star[1]};
    for (const Snapshot& s : traj.snapshots) {
        for (int j = 0; j < grid.n; ++j) {
            double row[10];
            row[0] = s.t;
            row[1] = grid.x(j);
            for (int c = 0; c < 4; ++c) row[2 + c] = base[c] + s.p[c][j];
            for (int c = 0; c < 4; ++c) row[6 + c] = s.w[c][j];
            append_row(out, row, 10);
        }
    }
    return out;
}

std::string series_csv(const Trajectory& traj) {
    const bool observed = !traj.observer_error.empty();
    std::string out = observed ? "t,sup_norm,l2_norm,u,observer_error\n" : "t,sup_norm,l2_norm,u\n";
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        double row[5] = {traj.t[k], traj.sup[k], traj.l2[k], traj.u[k],
                         observed ? traj.observer_error[k] : 0.0};
        append_row(out, row, observed ? 5 : 4);
    }
    return out;
}

std::string controller_kernels_csv(const ControllerKernels& kk) {
    std::string out = "x,xi,k11,k12,k13,l11\n";
    const TriangularGrid& g = kk.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j <= i; ++j) {
            double row[6] = {g.x(i), g.x(j), kk.k[0].at(i, j), kk.k[1].at(i, j), kk.k[2].at(i, j),
                             kk.l11.at(i, j)};
            append_row(out, row, 6);
        }
    return out;
}

std::string observer_kernels_csv(const ObserverKernels& ok) {
    std::string out = "x,xi,m11,m21,m31,n11\n";
    const TriangularGrid& g = ok.grid;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j <= i; ++j) {
            double row[6] = {g.x(i), g.x(j), ok.m[0].at(i, j), ok.m[1].at(i, j), ok.m[2].at(i, j),
                             ok.n11.at(i, j)};
            append_row(out, row, 6);
        }
    return out;
}

std::string observer_gains_csv(const ObserverKernels& ok) {
    std::string out = "x,p1,p2,p3,p11\n";
    const TriangularGrid& g = ok.grid;
    for (int i = 0; i < g.n; ++i) {
        double row[5] = {g.x(i), ok.p_plus[0][i], ok.p_plus[1][i], ok.p_plus[2][i],
                         ok.p11_minus[i]};
        append_row(out, row, 5);
    }
    return out;
}

std::string lambda4_grid_csv(const RegimeScan& scan) {
    std::string out = "rho1,rho2,lambda4\n";
    const std::size_t n2 = scan.rho2.size();
    for (std::size_t i = 0; i < scan.rho1.size(); ++i)
        for (std::size_t j = 0; j < n2; ++j) {
            double row[3] = {scan.rho1[i], scan.rho2[j], scan.lambda4[i * n2 + j]};
            append_row(out, row, 3);
        }
    return out;
}

std::string contour_csv(const RegimeScan& scan) {
    std::string out = "contour,rho1,rho2,lambda4\n";
    for (std::size_t c = 0; c < scan.contours.size(); ++c)
        for (const auto& v : scan.contours[c]) {
            out += std::to_string(c);
            out += ',';
            double row[3] = {v.rho1, v.rho2, v.lambda4};
            append_row(out, row, 3);
        }
    return out;
}

std::string residual_report_text(const ControllerResiduals& cr, const ObserverResiduals& orr,
                                 const ControllerKernels& kk, const ObserverKernels& ok) {
    std::string out;
    out += "controller: iterations=" + std::to_string(kk.iterations) +
           " final_change=" + format_double(kk.final_change) +
           " clamped_lookups=" + std::to_string(kk.clamp_count) + "\n";
    out += "controller pde residual (k rows)   sup = " + format_double(cr.pde_k) + "\n";
    out += "controller pde residual (l11)      sup = " + format_double(cr.pde_l11) + "\n";
    out += "controller base boundary residual  sup = " + format_double(cr.bc_base) + "\n";
    out += "controller diagonal residual       sup = " + format_double(cr.bc_diag) + "\n";
    out += "observer: iterations=" + std::to_string(ok.iterations) +
           " final_change=" + format_double(ok.final_change) +
           " clamped_lookups=" + std::to_string(ok.clamp_count) + "\n";
    out += "observer pde residual (m columns)  sup = " + format_double(orr.pde_m) + "\n";
    out += "observer pde residual (n11)        sup = " + format_double(orr.pde_n11) + "\n";
    out += "observer diagonal residual         sup = " + format_double(orr.bc_diag) + "\n";
    out += "observer top boundary residual     sup = " + format_double(orr.bc_top) + "\n";
    return out;
}

}  // namespace tcar
