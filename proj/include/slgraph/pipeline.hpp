// Trajectory generation: run the fine-grid classical solver, coarsen the
// states, and attach per-step normalized shifts traced on the coarse grid.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "slgraph/characteristics.hpp"
#include "slgraph/classical.hpp"
#include "slgraph/io.hpp"
#include "slgraph/problems.hpp"
#include "slgraph/rng.hpp"

namespace slgraph {

inline VelocityField1D problem_velocity_1d(const ProblemSpec& p) {
    if (p.family == "advect1d_variable") return sinusoidal_velocity();
    return constant_velocity(p.velocity);
}

inline VelocityField2D problem_velocity_2d(const ProblemSpec& p) {
    if (p.family == "swirl" || p.family == "swirl_two_bell") return swirl_velocity(p.swirl_period);
    return constant_velocity_2d(p.velocity, p.velocity);
}

inline double problem_max_speed(const ProblemSpec& p) {
    if (p.family == "advect1d_variable") return 1.0; // max |sin|
    if (p.family == "swirl" || p.family == "swirl_two_bell") return 1.0;
    if (p.vp) return p.y_max; // x-transport at speeds up to the velocity cut
    return std::fabs(p.velocity);
}

// Draws the initial condition for one trajectory; echoes the drawn
// parameters for the file header.
inline Field sample_initial_1d(const ProblemSpec& p, const Grid1D& g, Rng& rng,
                               ordered_json& params_out) {
    if (p.family == "advect1d_triangle_square") {
        auto tp = sample_triangle_square(rng, p.height, p.width, g);
        params_out = ordered_json{{"tri_height", tp.tri_height}, {"tri_width", tp.tri_width},
                                  {"sq_height", tp.sq_height},   {"sq_width", tp.sq_width},
                                  {"tri_center", tp.tri_center}, {"sq_center", tp.sq_center}};
        return make_triangle_square(g, tp);
    }
    Range center = p.center.fixed() && p.center.lo == 0.0
                       ? Range{g.x_min + 0.5 * g.length(), g.x_min + 0.5 * g.length()}
                       : p.center;
    auto sp = sample_square(rng, p.height, p.width, center);
    params_out =
        ordered_json{{"height", sp.height}, {"width", sp.width}, {"center", sp.center}};
    return make_square_wave(g, sp);
}

inline Field sample_initial_2d(const ProblemSpec& p, const Grid2D& g, Rng& rng,
                               ordered_json& params_out) {
    if (p.family == "swirl") {
        auto bp = sample_cosine_bell(rng, p.r0, p.center_x, p.center_y);
        params_out = ordered_json{{"r0", bp.r0}, {"cx", bp.cx}, {"cy", bp.cy}};
        return make_cosine_bell(g, bp);
    }
    if (p.family == "swirl_two_bell") {
        const double r0 = p.r0.sample(rng);
        const double c1x = p.center_x.sample(rng), c1y = p.center_y.sample(rng);
        const double c2x = p.center_x.sample(rng), c2y = p.center_y.sample(rng);
        params_out = ordered_json{{"r0", r0}, {"c1x", c1x}, {"c1y", c1y}, {"c2x", c2x},
                                  {"c2y", c2y}};
        Field f(static_cast<std::size_t>(g.size()));
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                auto [x, y] = g.coordinate(i, j);
                f[g.node(i, j)] = eval_two_bell(x, y, r0, c1x, c1y, c2x, c2y);
            }
        return f;
    }
    if (p.vp) {
        const VPFamily fam = p.family == "vp_landau" ? VPFamily::Landau
                             : p.family == "vp_two_stream" ? VPFamily::TwoStream
                                                           : VPFamily::MultiModeTwoStream;
        auto vp = sample_vp_init(rng, fam, p.alpha, p.k);
        params_out = ordered_json{{"alpha1", vp.alpha1}, {"alpha2", vp.alpha2},
                                  {"alpha3", vp.alpha3}, {"k", vp.k}};
        return make_vp_init(g, vp);
    }
    auto sp = sample_square_2d(rng, p.height, p.width, g);
    params_out = ordered_json{{"height", sp.height}, {"width", sp.width}, {"cx", sp.cx},
                              {"cy", sp.cy}};
    return make_square_wave_2d(g, sp);
}

// Splits a horizon into steps of the nominal size plus one shorter closing
// step when the horizon is not an exact multiple.
inline std::vector<double> fit_steps(double t_total, double dt_nominal) {
    std::vector<double> dts;
    const int full = static_cast<int>(std::floor(t_total / dt_nominal + 1e-12));
    for (int i = 0; i < full; ++i) dts.push_back(dt_nominal);
    const double rem = t_total - full * dt_nominal;
    if (rem > 1e-9 * dt_nominal) dts.push_back(rem);
    return dts;
}

inline TrajectoryFile generate_trajectory_1d(const RunConfig& cfg, int traj_index) {
    const ProblemSpec& p = cfg.problem;
    const Grid1D fine(cfg.n_hi, p.x_min, p.x_max);
    const Grid1D coarse = coarse_grid(fine, cfg.coarsen_factor);
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(traj_index));
    const double cfl_c = cfg.cfl.sample(rng);
    const double amax = problem_max_speed(p);
    const double dt = cfl_c * coarse.h / amax;
    const VelocityField1D v = problem_velocity_1d(p);

    TrajectoryFile out;
    out.grid = grid_to_json(coarse);
    ordered_json ic_params;
    Field u = sample_initial_1d(p, fine, rng, ic_params);
    out.problem = problem_to_json(p);
    out.problem["ic_params"] = ic_params;
    out.cfl = cfl_c;
    out.dt = dt;
    out.steps = cfg.steps;
    out.fields = {"U", "xi"};
    out.rng_seed = cfg.seed;
    out.generator = "weno5_ssprk3 fine_cfl=" + std::to_string(cfg.fine_cfl) +
                    " trace=rk4 substeps=" + std::to_string(default_substeps(cfl_c));

    double t = 0.0;
    for (int m = 0; m < cfg.steps; ++m) {
        out.add("U", m, coarsen(u, fine, cfg.coarsen_factor));
        if (m + 1 == cfg.steps) break;
        out.step_dts.push_back(dt);
        const ShiftField1D s =
            trace_1d(v, coarse, t + dt, dt, default_substeps(cfl_c));
        out.add("xi", m, s.xi);
        const int nsub =
            std::max(1, static_cast<int>(std::ceil(dt * amax / (cfg.fine_cfl * fine.h))));
        const double fdt = dt / nsub;
        for (int s2 = 0; s2 < nsub; ++s2) {
            u = weno5_advect_step_1d(u, v, fine, t, fdt);
            t += fdt;
        }
    }
    return out;
}

inline TrajectoryFile generate_trajectory_2d(const RunConfig& cfg, int traj_index) {
    const ProblemSpec& p = cfg.problem;
    const int ny_hi = cfg.ny_hi > 0 ? cfg.ny_hi : cfg.n_hi;
    const Grid2D fine(cfg.n_hi, ny_hi, p.x_min, p.x_max, p.y_min, p.y_max, true);
    const Grid2D coarse = coarse_grid(fine, cfg.coarsen_factor);
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(traj_index));
    const double cfl_c = cfg.cfl.sample(rng);
    const double amax = problem_max_speed(p);
    const double dt_nom = cfl_c / (amax / coarse.hx + amax / coarse.hy);
    const VelocityField2D v = problem_velocity_2d(p);

    const std::vector<double> dts =
        cfg.t_end > 0.0 ? fit_steps(cfg.t_end, dt_nom)
                        : std::vector<double>(static_cast<std::size_t>(cfg.steps - 1), dt_nom);

    TrajectoryFile out;
    out.grid = grid_to_json(coarse);
    ordered_json ic_params;
    Field u = sample_initial_2d(p, fine, rng, ic_params);
    out.problem = problem_to_json(p);
    out.problem["ic_params"] = ic_params;
    out.cfl = cfl_c;
    out.dt = dt_nom;
    out.steps = static_cast<int>(dts.size()) + 1;
    out.fields = {"U", "xi", "eta"};
    out.step_dts = dts;
    out.rng_seed = cfg.seed;
    out.generator = "weno5_ssprk3 fine_cfl=" + std::to_string(cfg.fine_cfl);

    double t = 0.0;
    for (std::size_t m = 0; m < dts.size() + 1; ++m) {
        out.add("U", static_cast<int>(m), coarsen(u, fine, cfg.coarsen_factor));
        if (m == dts.size()) break;
        const double dt = dts[m];
        const double step_cfl = dt * (amax / coarse.hx + amax / coarse.hy);
        const ShiftField2D s = trace_2d(v, coarse, t + dt, dt, default_substeps(step_cfl));
        out.add("xi", static_cast<int>(m), s.xi);
        out.add("eta", static_cast<int>(m), s.eta);
        const int nsub = std::max(
            1, static_cast<int>(std::ceil(dt * (amax / fine.hx + amax / fine.hy) / cfg.fine_cfl)));
        const double fdt = dt / nsub;
        for (int s2 = 0; s2 < nsub; ++s2) {
            u = weno5_advect_step_2d(u, v, fine, t, fdt);
            t += fdt;
        }
    }
    return out;
}

// VP trajectories store coarsened phase-space states only; shifts depend on
// the evolving self-consistent field and are recomputed during training.
inline TrajectoryFile generate_trajectory_vp(const RunConfig& cfg, int traj_index) {
    const ProblemSpec& p = cfg.problem;
    const int ny_hi = cfg.ny_hi > 0 ? cfg.ny_hi : 2 * cfg.n_hi;
    const Grid2D fine(cfg.n_hi, ny_hi, p.x_min, p.x_max, p.y_min, p.y_max, false);
    const Grid2D coarse = coarse_grid(fine, cfg.coarsen_factor);
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(traj_index));
    ordered_json ic_params;
    Field f = sample_initial_2d(p, fine, rng, ic_params);

    const double vmax = p.y_max;
    const double dt_nom = cfg.vp_cfl * coarse.hx / vmax;
    const std::vector<double> dts = fit_steps(cfg.t_end > 0.0 ? cfg.t_end : 5.0, dt_nom);

    TrajectoryFile out;
    out.grid = grid_to_json(coarse);
    out.problem = problem_to_json(p);
    out.problem["ic_params"] = ic_params;
    out.cfl = cfg.vp_cfl;
    out.dt = dt_nom;
    out.steps = static_cast<int>(dts.size()) + 1;
    out.fields = {"f"};
    out.step_dts = dts;
    out.rng_seed = cfg.seed;
    out.generator = "vlasov_weno5_ssprk3 fine_cfl=" + std::to_string(cfg.fine_cfl);

    double t = 0.0;
    for (std::size_t m = 0; m < dts.size() + 1; ++m) {
        out.add("f", static_cast<int>(m), coarsen(f, fine, cfg.coarsen_factor));
        if (m == dts.size()) break;
        double remaining = dts[m];
        while (remaining > 1e-12) {
            const double fdt = std::min(remaining, vlasov_reference_dt(f, fine, cfg.fine_cfl));
            f = vlasov_reference_step(f, fine, fdt);
            remaining -= fdt;
            t += fdt;
        }
    }
    return out;
}

inline TrajectoryFile generate_trajectory(const RunConfig& cfg, int traj_index) {
    if (cfg.problem.vp) return generate_trajectory_vp(cfg, traj_index);
    if (cfg.problem.dim == 2) return generate_trajectory_2d(cfg, traj_index);
    return generate_trajectory_1d(cfg, traj_index);
}

} // namespace slgraph
