#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "tcar/config.hpp"
#include "tcar/csvio.hpp"
#include "tcar/errors.hpp"
#include "tcar/model.hpp"
#include "tcar/sim.hpp"

namespace {

using namespace tcar;

struct Overrides {
    std::string scenario;
    std::string out;
    int grid_n = -1;
    int kernel_n = -1;
    double cfl = -1.0;
    double t_end = -1.0;
};

void add_common(CLI::App* sub, std::string& config_path, Overrides& ov) {
    sub->add_option("--config", config_path, "Key-value config file")->required();
    sub->add_option("--out", ov.out, "Output directory (default from config)");
    sub->add_option("--grid-n", ov.grid_n, "Simulation grid nodes override");
    sub->add_option("--kernel-n", ov.kernel_n, "Kernel grid nodes override");
    sub->add_option("--cfl", ov.cfl, "Courant fraction override (0,1]");
    sub->add_option("--t-end", ov.t_end, "Simulation horizon override [s]");
}

RunConfig load(const std::string& path, const Overrides& ov) {
    RunConfig rc = parse_config(path);
    if (!ov.scenario.empty()) rc.sim.scenario = scenario_from_name(ov.scenario);
    if (!ov.out.empty()) rc.out_dir = ov.out;
    if (ov.grid_n > 0) rc.sim.grid_n = ov.grid_n;
    if (ov.kernel_n > 0) rc.sim.kernel_options.grid_n = ov.kernel_n;
    if (ov.cfl > 0.0) rc.sim.cfl_fraction = ov.cfl;
    if (ov.t_end > 0.0) rc.sim.t_end = ov.t_end;
    rc.sim.validate();
    return rc;
}

std::string out_path(const RunConfig& rc, const std::string& name) {
    std::filesystem::create_directories(rc.out_dir);
    return (std::filesystem::path(rc.out_dir) / name).string();
}

int do_analyze(const RunConfig& rc) {
    Pipeline pipe = build_pipeline(rc.classes, rc.road, rc.rho_star);
    const EquilibriumState& eq = pipe.eq;
    const Linearization& lin = pipe.lin;
    for (int i = 0; i < 2; ++i)
        std::printf("class %d: rho* = %.6f veh/m (%.3f veh/km)  v* = %.6f m/s (%.6f km/h)  q* = %.6f veh/s\n",
                    i + 1, eq.rho_star[i], eq.rho_star[i] * 1e3, eq.v_star[i], eq.v_star[i] * 3.6,
                    eq.q_star[i]);
    std::printf("area occupancy AO* = %.9f\n", eq.ao_star);
    std::printf("regime: %s\n", regime_name(lin.regime));
    std::printf("characteristic speeds [m/s]: %.9f  %.9f  %.9f  %.9f\n", lin.lambdas[0],
                lin.lambdas[1], lin.lambdas[2], lin.lambdas[3]);
    std::printf("design rates [1/m]: %.6e  %.6e  %.6e  %.6e\n", pipe.design.rate[0],
                pipe.design.rate[1], pipe.design.rate[2], pipe.design.rate[3]);
    const double tf = finite_time_horizon(pipe.design);
    std::printf("finite-time horizon t_F = %.6f s, 2 t_F = %.6f s\n", tf, 2.0 * tf);
    std::printf("outlet input gain (flow per unit design input) = %.9e veh/s\n",
                pipe.transform.input_gain());
    return 0;
}

int do_contour(const RunConfig& rc) {
    const ContourConfig& cc = rc.contour;
    RegimeScan scan = congestion_boundary_scan(rc.road, rc.classes, {cc.rho1_min, cc.rho1_max},
                                               {cc.rho2_min, cc.rho2_max}, cc.resolution);
    const std::string grid_file = out_path(rc, "lambda4_grid.csv");
    const std::string contour_file = out_path(rc, "contour.csv");
    write_text_atomic(grid_file, lambda4_grid_csv(scan));
    write_text_atomic(contour_file, contour_csv(scan));
    std::size_t vertices = 0;
    for (const auto& c : scan.contours) vertices += c.size();
    std::printf("grid: %zu x %zu samples over rho1 in [%.3f,%.3f] veh/km, rho2 in [%.3f,%.3f] veh/km\n",
                scan.rho1.size(), scan.rho2.size(), cc.rho1_min * 1e3, cc.rho1_max * 1e3,
                cc.rho2_min * 1e3, cc.rho2_max * 1e3);
    std::printf("zero contours: %zu polylines, %zu vertices, |lambda4| < %.3e m/s at vertices\n",
                scan.contours.size(), vertices, scan.tolerance);

    // Classify the configured equilibrium point against the boundary.
    EquilibriumState eq = compute_equilibrium(rc.rho_star, rc.road, rc.classes);
    Linearization lin = linearize(eq, pressure_gradients(eq, rc.road, rc.classes), rc.classes);
    std::printf("rho* = (%.3f, %.3f) veh/km: lambda4 = %.6f m/s -> %s side\n", rc.rho_star[0] * 1e3,
                rc.rho_star[1] * 1e3, lin.lambdas[3], regime_name(lin.regime));
    std::printf("wrote %s and %s\n", grid_file.c_str(), contour_file.c_str());
    return 0;
}

int do_kernels(const RunConfig& rc) {
    Pipeline pipe = build_pipeline(rc.classes, rc.road, rc.rho_star);
    const SolveOptions& opt = rc.sim.kernel_options;
    KernelProblem problem = make_kernel_problem(pipe.design);
    ControllerKernels kk = solve_controller_kernels(problem, opt);
    ObserverKernels ok = solve_observer_kernels(problem, opt);
    ControllerResiduals cr = kernel_residual(kk, problem);
    ObserverResiduals orr = kernel_residual(ok, problem);
    write_text_atomic(out_path(rc, "controller_kernels.csv"), controller_kernels_csv(kk));
    write_text_atomic(out_path(rc, "observer_kernels.csv"), observer_kernels_csv(ok));
    write_text_atomic(out_path(rc, "observer_gains.csv"), observer_gains_csv(ok));
    const std::string report = residual_report_text(cr, orr, kk, ok);
    write_text_atomic(out_path(rc, "residual_report.txt"), report);
    std::fputs(report.c_str(), stdout);
    std::printf("wrote kernel fields and gains to %s\n", rc.out_dir.c_str());
    return 0;
}

int do_simulate(const RunConfig& rc) {
    Pipeline pipe = build_pipeline(rc.classes, rc.road, rc.rho_star);
    Trajectory traj = run_scenario(pipe, rc.sim);
    ConvergenceReport rep = convergence_metrics(traj, pipe.design);
    write_text_atomic(out_path(rc, "series.csv"), series_csv(traj));
    write_text_atomic(out_path(rc, "snapshots.csv"),
                      snapshots_csv(traj, SpaceGrid{rc.sim.grid_n, rc.road.length}, pipe.eq));
    const double dt = traj.t.size() > 1 ? traj.t[1] - traj.t[0] : 0.0;
    std::printf("scenario: %s\n", scenario_name(rc.sim.scenario));
    std::printf("grid: N = %d, dt = %.6f s, steps = %zu, t_end = %.6f s\n", rc.sim.grid_n, dt,
                traj.t.size() - 1, traj.t.back());
    std::printf("t_F = %.6f s, 2 t_F = %.6f s\n", rep.t_f, rep.two_t_f);
    std::printf("final sup-norm ratio vs initial = %.6e\n", rep.final_ratio);
    if (rep.time_to_threshold >= 0.0)
        std::printf("stays below 5%% of initial from t = %.6f s\n", rep.time_to_threshold);
    else
        std::printf("never settles below the 5%% threshold\n");
    if (!traj.observer_error.empty())
        std::printf("final observer design-state error sup = %.6e\n", traj.observer_error.back());
    std::printf("wrote %s and %s\n", out_path(rc, "series.csv").c_str(),
                out_path(rc, "snapshots.csv").c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-class traffic flow: equilibrium analysis, backstepping kernels, closed-loop simulation"};
    app.require_subcommand(1);
    std::string config_path;
    Overrides ov;

    CLI::App* analyze = app.add_subcommand("analyze", "Equilibrium, regime and characteristic speeds");
    CLI::App* contour = app.add_subcommand("contour", "Congestion boundary scan over density ranges");
    CLI::App* kernels = app.add_subcommand("kernels", "Solve feedback and observer kernels, write fields");
    CLI::App* simulate = app.add_subcommand("simulate", "Run a closed-loop or open-loop scenario");
    for (CLI::App* sub : {analyze, contour, kernels, simulate}) add_common(sub, config_path, ov);
    simulate->add_option("--scenario", ov.scenario,
                         "open-loop | full-state | output-feedback (overrides config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const RunConfig rc = load(config_path, ov);
        if (app.got_subcommand(analyze)) return do_analyze(rc);
        if (app.got_subcommand(contour)) return do_contour(rc);
        if (app.got_subcommand(kernels)) return do_kernels(rc);
        return do_simulate(rc);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "tcar: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "tcar: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "tcar: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "tcar: %s\n", e.what());
        return 3;
    }
}
