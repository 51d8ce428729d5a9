// Command-line driver: data generation, training, simulation, evaluation,
// and Vlasov-Poisson runs.
//
// Exit codes: 0 success, 1 usage error, 2 config/schema error, 3 runtime
// failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "slgraph/slgraph.hpp"

namespace fs = std::filesystem;
using namespace slgraph;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
    if (!g_quiet) std::cout << msg << "\n";
}

std::string traj_path(const std::string& dir, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%03d.slg", index);
    return (fs::path(dir) / buf).string();
}

std::vector<TrajectoryFile> read_trajectories(const std::vector<std::string>& paths) {
    std::vector<TrajectoryFile> files;
    files.reserve(paths.size());
    for (const auto& p : paths) files.push_back(read_trajectory(p));
    return files;
}

std::string dataset_hash(const std::vector<std::string>& paths) {
    std::vector<std::string> sorted = paths;
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : sorted) {
        std::ifstream is(p, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                                std::istreambuf_iterator<char>());
        const std::uint64_t fh = fnv1a64(bytes.data(), bytes.size());
        h = fnv1a64(&fh, sizeof fh, h);
    }
    return hash_hex(h);
}

int cmd_generate(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<TrajectoryFile> files(static_cast<std::size_t>(std::max(0, cfg.trajectories)));
    parallel_for(cfg.trajectories, [&](int i) { files[i] = generate_trajectory(cfg, i); });
    for (int i = 0; i < cfg.trajectories; ++i) write_trajectory(traj_path(out_dir, i), files[i]);
    info("wrote " + std::to_string(cfg.trajectories) + " trajectories to " + out_dir);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::vector<std::string>& data_paths,
              const std::string& out_dir) {
    if (data_paths.empty()) throw std::runtime_error("train: no trajectory files given");
    fs::create_directories(out_dir);
    std::vector<TrajectoryFile> files = read_trajectories(data_paths);

    TrainOptions opt;
    opt.epochs = cfg.epochs;
    opt.lr = cfg.lr;
    opt.batch_pairs = cfg.batch_pairs;
    opt.val_fraction = cfg.val_fraction;
    opt.patience = cfg.patience;
    opt.seed = cfg.seed;

    Checkpoint cp;
    cp.problem_family = cfg.problem.family;
    cp.dataset_hash = dataset_hash(data_paths);

    TrainResult result;
    if (cfg.problem.vp) {
        const Grid2D grid = grid2d_from_json(files[0].grid);
        std::vector<RolloutWindow> windows;
        for (const auto& f : files) {
            auto w = extract_windows(f, cfg.unroll_steps);
            windows.insert(windows.end(), w.begin(), w.end());
        }
        result = train_unrolled(make_model_params(cfg.model, cfg.seed), grid, windows, opt);
        cp.cfl_min = cp.cfl_max = files[0].cfl;
    } else {
        Dataset ds = build_dataset(files);
        result = train_one_step(make_model_params(cfg.model, cfg.seed), ds, opt);
        cp.cfl_min = ds.cfl_min;
        cp.cfl_max = ds.cfl_max;
    }
    cp.params = result.params;
    const std::string cp_path = (fs::path(out_dir) / "checkpoint.slg").string();
    save_checkpoint(cp_path, cp);

    std::ofstream hist((fs::path(out_dir) / "loss_history.csv").string());
    hist << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
        hist << e << ',' << result.train_loss[e] << ',';
        if (e < result.val_loss.size()) hist << result.val_loss[e];
        hist << '\n';
    }
    info("checkpoint written to " + cp_path +
         " (best epoch " + std::to_string(result.best_epoch) + ")");
    return 0;
}

int cmd_simulate(const Checkpoint& cp, const RunConfig& cfg, int steps, double cfl,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    const ProblemSpec& p = cfg.problem;
    if (p.vp) throw std::runtime_error("simulate: use the vp subcommand for Vlasov-Poisson runs");
    Rng rng = Rng::substream(cfg.seed, 0xABC);

    const bool in_range = cfl >= cp.cfl_min - 1e-12 && cfl <= cp.cfl_max + 1e-12;
    if (!in_range)
        std::cerr << "WARNING: requested CFL " << cfl << " lies outside the trained range ["
                  << cp.cfl_min << ", " << cp.cfl_max
                  << "]; expect degraded accuracy.\n";

    TrajectoryFile out;
    out.cfl = cfl;
    out.rng_seed = cfg.seed;
    out.generator = "model checkpoint_dataset=" + cp.dataset_hash;

    if (p.dim == 1) {
        const Grid1D fine(cfg.n_hi, p.x_min, p.x_max);
        const Grid1D coarse = coarse_grid(fine, cfg.coarsen_factor);
        const double amax = problem_max_speed(p);
        const double dt = cfl * coarse.h / amax;
        const VelocityField1D v = problem_velocity_1d(p);
        ordered_json ic_params;
        Field u = coarsen(sample_initial_1d(p, fine, rng, ic_params), fine, cfg.coarsen_factor);
        out.grid = grid_to_json(coarse);
        out.problem = problem_to_json(p);
        out.problem["ic_params"] = ic_params;
        out.dt = dt;
        out.steps = steps + 1;
        out.fields = {"U", "xi"};
        double t = 0.0;
        for (int m = 0; m <= steps; ++m) {
            out.add("U", m, u);
            if (m == steps) break;
            out.step_dts.push_back(dt);
            const ShiftField1D s = trace_1d(v, coarse, t + dt, dt, default_substeps(cfl));
            out.add("xi", m, s.xi);
            u = model_apply_1d(cp.params, u, s.xi, coarse);
            t += dt;
        }
    } else {
        const int ny_hi = cfg.ny_hi > 0 ? cfg.ny_hi : cfg.n_hi;
        const Grid2D fine(cfg.n_hi, ny_hi, p.x_min, p.x_max, p.y_min, p.y_max, true);
        const Grid2D coarse = coarse_grid(fine, cfg.coarsen_factor);
        const double amax = problem_max_speed(p);
        const double dt_nom = cfl / (amax / coarse.hx + amax / coarse.hy);
        const std::vector<double> dts =
            cfg.t_end > 0.0 ? fit_steps(cfg.t_end, dt_nom)
                            : std::vector<double>(static_cast<std::size_t>(steps), dt_nom);
        const VelocityField2D v = problem_velocity_2d(p);
        ordered_json ic_params;
        Field u = coarsen(sample_initial_2d(p, fine, rng, ic_params), fine, cfg.coarsen_factor);
        out.grid = grid_to_json(coarse);
        out.problem = problem_to_json(p);
        out.problem["ic_params"] = ic_params;
        out.dt = dt_nom;
        out.steps = static_cast<int>(dts.size()) + 1;
        out.fields = {"U", "xi", "eta"};
        out.step_dts = dts;
        double t = 0.0;
        for (std::size_t m = 0; m <= dts.size(); ++m) {
            out.add("U", static_cast<int>(m), u);
            if (m == dts.size()) break;
            const double dt = dts[m];
            const double step_cfl = dt * (amax / coarse.hx + amax / coarse.hy);
            const ShiftField2D s = trace_2d(v, coarse, t + dt, dt, default_substeps(step_cfl));
            out.add("xi", static_cast<int>(m), s.xi);
            out.add("eta", static_cast<int>(m), s.eta);
            u = model_apply_2d(cp.params, u, s.xi, s.eta, coarse);
            t += dt;
        }
    }
    const std::string path = (fs::path(out_dir) / "simulated.slg").string();
    write_trajectory(path, out);

    ordered_json summary;
    summary["kind"] = "simulate_summary";
    summary["cfl"] = cfl;
    summary["trained_cfl_range"] = {cp.cfl_min, cp.cfl_max};
    summary["cfl_in_range"] = in_range;
    std::ofstream(fs::path(out_dir) / "summary.json") << summary.dump(2) << "\n";
    info("simulation written to " + path);
    return 0;
}

int cmd_evaluate(const Checkpoint& cp, const std::vector<std::string>& ref_paths,
                 const std::string& out_dir) {
    if (ref_paths.empty()) throw std::runtime_error("evaluate: no reference files given");
    fs::create_directories(out_dir);
    std::vector<TrajectoryFile> refs = read_trajectories(ref_paths);
    EvalOptions opt;
    opt.trained_cfl_min = cp.cfl_min;
    opt.trained_cfl_max = cp.cfl_max;
    std::vector<double> step_ms;
    const ordered_json report = evaluate_model(cp.params, refs, opt, &step_ms);
    if (!report.at("cfl_in_range").get<bool>())
        std::cerr << "WARNING: reference CFL lies outside the trained range ["
                  << cp.cfl_min << ", " << cp.cfl_max << "]; expect degraded accuracy.\n";
    std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << "\n";
    // timing goes to a sidecar so the report itself is byte-reproducible
    std::ofstream timing(fs::path(out_dir) / "timings.csv");
    timing << "step,ms\n";
    for (std::size_t i = 0; i < step_ms.size(); ++i) timing << i << ',' << step_ms[i] << '\n';
    info("report written to " + (fs::path(out_dir) / "report.json").string());
    return 0;
}

int cmd_vp(const RunConfig& cfg, const Checkpoint* cp, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const ProblemSpec& p = cfg.problem;
    if (!p.vp) throw std::runtime_error("vp: config problem is not a Vlasov-Poisson family");
    const int ny_hi = cfg.ny_hi > 0 ? cfg.ny_hi : 2 * cfg.n_hi;
    const Grid2D fine(cfg.n_hi, ny_hi, p.x_min, p.x_max, p.y_min, p.y_max, false);
    const Grid2D grid = coarse_grid(fine, cfg.coarsen_factor);
    Rng rng = Rng::substream(cfg.seed, 0xDEF);
    ordered_json ic_params;
    Field f0 = sample_initial_2d(p, grid, rng, ic_params);

    const SLEvolve evolve = cp ? model_evolve(cp->params, grid) : baseline_evolve(grid);
    const double dt_nom = cfg.vp_cfl * grid.hx / p.y_max;
    const std::vector<double> dts = fit_steps(cfg.t_end > 0.0 ? cfg.t_end : 5.0, dt_nom);

    TrajectoryFile out;
    out.grid = grid_to_json(grid);
    out.problem = problem_to_json(p);
    out.problem["ic_params"] = ic_params;
    out.cfl = cfg.vp_cfl;
    out.dt = dt_nom;
    out.steps = static_cast<int>(dts.size()) + 1;
    out.fields = {"f"};
    out.step_dts = dts;
    out.rng_seed = cfg.seed;
    out.generator = cp ? "gnn_sl_rkei" + std::to_string(cfg.rkei_order)
                       : "baseline_sl_rkei" + std::to_string(cfg.rkei_order);

    std::ofstream diag((fs::path(out_dir) / "diagnostics.csv").string());
    write_diagnostics_header(diag);
    VPState state = make_vp_state(grid, f0, 0.0, 1e-8);
    write_diagnostics_row(diag, state);
    out.add("f", 0, state.f);
    for (std::size_t m = 0; m < dts.size(); ++m) {
        state = cfg.rkei_order == 1 ? rkei1_step(state, dts[m], evolve, 1e-8)
                                    : rkei2_step(state, dts[m], evolve, 1e-8);
        out.add("f", static_cast<int>(m) + 1, state.f);
        write_diagnostics_row(diag, state);
    }
    write_trajectory((fs::path(out_dir) / "vp_run.slg").string(), out);
    info("vp run written to " + out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conservative semi-Lagrangian transport solver with learned coefficients"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", checkpoint_path;
    std::vector<std::string> inputs;
    std::uint64_t seed_override = 0;
    bool have_seed = false;
    int steps = 20;
    double sim_cfl = 0.0;

    app.add_flag("--quiet", g_quiet, "suppress progress output");

    auto* gen = app.add_subcommand("generate", "generate coarsened training trajectories");
    gen->add_option("--config", config_path, "run config JSON")->required();
    gen->add_option("--out", out_dir, "output directory");
    gen->add_option("--seed", seed_override, "override config seed")->each([&](std::string) {
        have_seed = true;
    });

    auto* tr = app.add_subcommand("train", "train a coefficient network on trajectories");
    tr->add_option("--config", config_path, "run config JSON")->required();
    tr->add_option("--out", out_dir, "output directory");
    tr->add_option("--seed", seed_override, "override config seed")->each([&](std::string) {
        have_seed = true;
    });
    tr->add_option("files", inputs, "trajectory files")->required();

    auto* sim = app.add_subcommand("simulate", "roll out a trained model on a fresh sample");
    sim->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    sim->add_option("--config", config_path, "run config JSON")->required();
    sim->add_option("--steps", steps, "number of steps (1D; 2D uses the config horizon)");
    sim->add_option("--cfl", sim_cfl, "step CFL (default: top of the config range)");
    sim->add_option("--out", out_dir, "output directory");
    sim->add_option("--seed", seed_override, "override config seed")->each([&](std::string) {
        have_seed = true;
    });

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint against references");
    ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    ev->add_option("--reference", inputs, "reference trajectory files")->required();
    ev->add_option("--out", out_dir, "output directory");

    auto* vp = app.add_subcommand("vp", "run the Vlasov-Poisson solver");
    vp->add_option("--config", config_path, "run config JSON")->required();
    vp->add_option("--checkpoint", checkpoint_path, "optional model checkpoint");
    vp->add_option("--out", out_dir, "output directory");
    vp->add_option("--seed", seed_override, "override config seed")->each([&](std::string) {
        have_seed = true;
    });

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config(config_path);
            if (have_seed) cfg.seed = seed_override;
        }
        if (gen->parsed()) return cmd_generate(cfg, out_dir);
        if (tr->parsed()) return cmd_train(cfg, inputs, out_dir);
        if (sim->parsed()) {
            const Checkpoint cp = load_checkpoint(checkpoint_path);
            const double cfl = sim_cfl > 0.0 ? sim_cfl : cfg.cfl.hi;
            return cmd_simulate(cp, cfg, steps, cfl, out_dir);
        }
        if (ev->parsed()) {
            const Checkpoint cp = load_checkpoint(checkpoint_path);
            return cmd_evaluate(cp, inputs, out_dir);
        }
        if (vp->parsed()) {
            Checkpoint cp;
            const bool have_cp = !checkpoint_path.empty();
            if (have_cp) cp = load_checkpoint(checkpoint_path);
            return cmd_vp(cfg, have_cp ? &cp : nullptr, out_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
