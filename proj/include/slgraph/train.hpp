// Dataset assembly, one-step supervised training for linear transport,
// unrolled RKEI-2 training for Vlasov-Poisson, and evaluation metrics.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "slgraph/classical.hpp"
#include "slgraph/io.hpp"
#include "slgraph/model.hpp"
#include "slgraph/threading.hpp"
#include "slgraph/vp.hpp"

namespace slgraph {

struct TrainingPair {
    Field u, xi, eta; // eta empty for 1D
    Field target;
    int traj_id = 0;
    int step_index = 0;
    double cfl = 0.0;
    double dt = 0.0;
};

struct Dataset {
    int dim = 1;
    Grid1D grid1;
    Grid2D grid2;
    std::vector<TrainingPair> pairs;
    int trajectories = 0;
    double cfl_min = 0.0, cfl_max = 0.0;
};

// Adjacent-step (input, target) extraction; rejects mixed grids.
inline Dataset build_dataset(const std::vector<TrajectoryFile>& files) {
    require(!files.empty(), "build_dataset: no trajectory files");
    Dataset ds;
    ds.dim = files[0].grid.at("dim").get<int>();
    if (ds.dim == 1)
        ds.grid1 = grid1d_from_json(files[0].grid);
    else
        ds.grid2 = grid2d_from_json(files[0].grid);
    ds.cfl_min = 1e300;
    ds.cfl_max = -1e300;
    for (std::size_t fidx = 0; fidx < files.size(); ++fidx) {
        const TrajectoryFile& t = files[fidx];
        if (t.grid != files[0].grid)
            throw std::runtime_error("build_dataset: trajectory grids do not match");
        for (int m = 0; m + 1 < t.steps; ++m) {
            TrainingPair pair;
            pair.u = t.get("U", m);
            pair.xi = t.get("xi", m);
            if (ds.dim == 2) pair.eta = t.get("eta", m);
            pair.target = t.get("U", m + 1);
            pair.traj_id = static_cast<int>(fidx);
            pair.step_index = m;
            pair.dt = t.step_dts.empty() ? t.dt : t.step_dts[m];
            pair.cfl = t.dt > 0.0 ? t.cfl * pair.dt / t.dt : t.cfl;
            ds.cfl_min = std::min(ds.cfl_min, pair.cfl);
            ds.cfl_max = std::max(ds.cfl_max, pair.cfl);
            ds.pairs.push_back(std::move(pair));
        }
    }
    ds.trajectories = static_cast<int>(files.size());
    return ds;
}

struct TrainOptions {
    int epochs = 300;
    double lr = 1e-3;
    int batch_pairs = 32;
    double val_fraction = 0.1;
    int patience = 50;
    std::uint64_t seed = 1;
};

struct TrainResult {
    ModelParams params; // parameters at the best validation epoch
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
};

namespace detail {

inline double pair_loss_and_grad(const ModelParams& params, const Dataset& ds,
                                 const TrainingPair& pair, std::vector<Tensor>* grads) {
    Tape t;
    BoundParams bp = bind_params(t, params);
    const int u = leaf(t, Tensor::from_field(pair.u));
    const ModelStep s = ds.dim == 1 ? model_step_1d(t, bp, u, pair.xi, ds.grid1)
                                    : model_step_2d(t, bp, u, pair.xi, pair.eta, ds.grid2);
    const int loss = mse(t, s.u_next, leaf(t, Tensor::from_field(pair.target)));
    const double value = t.value(loss)[0];
    if (grads) {
        t.backward(loss);
        grads->clear();
        grads->reserve(bp.ids.size());
        for (int id : bp.ids) grads->push_back(t.grad(id));
    }
    return value;
}

// Deterministic Fisher-Yates shuffle.
inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

} // namespace detail

// Minimizes the mean squared one-step error with Adam over shuffled
// minibatches. Per-sample gradients are accumulated in sample order, so the
// result is identical for any worker count. Validation trajectories (the
// trailing fraction) drive early stopping.
inline TrainResult train_one_step(const ModelParams& init, const Dataset& ds,
                                  const TrainOptions& opt) {
    require(!ds.pairs.empty(), "train_one_step: empty dataset");
    TrainResult res;
    res.params = init;
    if (opt.epochs == 0) return res;

    const int n_val_traj =
        opt.val_fraction > 0.0 && ds.trajectories > 1
            ? std::max(1, static_cast<int>(std::floor(opt.val_fraction * ds.trajectories)))
            : 0;
    std::vector<int> train_idx, val_idx;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        if (ds.pairs[i].traj_id >= ds.trajectories - n_val_traj)
            val_idx.push_back(static_cast<int>(i));
        else
            train_idx.push_back(static_cast<int>(i));
    }

    ModelParams current = init;
    AdamState adam;
    adam.lr = opt.lr;
    double best = 1e300;
    ModelParams best_params = current;
    int best_epoch = -1;

    std::vector<std::vector<Tensor>> batch_grads;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng erng = Rng::substream(opt.seed, 0x10000 + static_cast<std::uint64_t>(epoch));
        std::vector<int> order = train_idx;
        detail::shuffle_indices(order, erng);

        double epoch_loss = 0.0;
        int epoch_count = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opt.batch_pairs)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(opt.batch_pairs));
            const int bsize = static_cast<int>(stop - start);
            batch_grads.assign(bsize, {});
            std::vector<double> losses(bsize, 0.0);
            parallel_for(bsize, [&](int b) {
                losses[b] = detail::pair_loss_and_grad(current, ds, ds.pairs[order[start + b]],
                                                       &batch_grads[b]);
            });
            std::vector<Tensor> grad_sum = batch_grads[0];
            for (int b = 1; b < bsize; ++b)
                for (std::size_t p = 0; p < grad_sum.size(); ++p)
                    for (std::size_t i = 0; i < grad_sum[p].numel(); ++i)
                        grad_sum[p][i] += batch_grads[b][p][i];
            for (auto& gten : grad_sum)
                for (double& v : gten.data) v /= bsize;
            for (double l : losses) {
                if (!std::isfinite(l)) throw std::runtime_error("train_one_step: loss diverged");
                epoch_loss += l;
                ++epoch_count;
            }
            adam_step(current.tensors, grad_sum, adam);
        }
        res.train_loss.push_back(epoch_loss / std::max(1, epoch_count));

        double monitored = res.train_loss.back();
        if (!val_idx.empty()) {
            std::vector<double> vl(val_idx.size(), 0.0);
            parallel_for(static_cast<int>(val_idx.size()), [&](int i) {
                vl[i] = detail::pair_loss_and_grad(current, ds, ds.pairs[val_idx[i]], nullptr);
            });
            monitored = std::accumulate(vl.begin(), vl.end(), 0.0) / vl.size();
            res.val_loss.push_back(monitored);
        }
        if (!std::isfinite(monitored)) throw std::runtime_error("train_one_step: loss diverged");
        if (monitored < best) {
            best = monitored;
            best_params = current;
            best_epoch = epoch;
        } else if (epoch - best_epoch > opt.patience) {
            break;
        }
    }
    res.params = best_epoch >= 0 ? best_params : current;
    res.best_epoch = best_epoch;
    return res;
}

// ---------------------------------------------------------------------------
// Unrolled training for the Vlasov-Poisson solver.

struct RolloutWindow {
    Field f0;
    std::vector<Field> refs; // states after each of the unrolled steps
    std::vector<double> dts;
};

// Non-overlapping windows of `unroll` consecutive steps.
inline std::vector<RolloutWindow> extract_windows(const TrajectoryFile& t, int unroll) {
    std::vector<RolloutWindow> out;
    for (int start = 0; start + unroll < t.steps; start += unroll) {
        RolloutWindow w;
        w.f0 = t.get("f", start);
        for (int k = 1; k <= unroll; ++k) {
            w.refs.push_back(t.get("f", start + k));
            w.dts.push_back(t.step_dts[start + k - 1]);
        }
        out.push_back(std::move(w));
    }
    return out;
}

// Differentiable RKEI-2 rollout. The electric field, shifts, and graphs are
// recomputed from current tape values but enter as constants (no gradient
// flows through characteristic tracing or graph construction); gradients
// propagate through the solution values only. Stage two evolves the step's
// INITIAL state with the stage-one field, per the two-stage tableau.
inline int rollout_rkei2_loss(Tape& t, const BoundParams& bp, const Grid2D& grid,
                              const RolloutWindow& w, double poisson_tol = 1e-8) {
    int f = leaf(t, Tensor::from_field(w.f0));
    int total = -1;
    for (std::size_t k = 0; k < w.refs.size(); ++k) {
        const double dt = w.dts[k];
        const Field fval = t.value(f).to_field();
        const Field e0 = poisson_periodic(vp_density(fval, grid), grid.x_grid(), poisson_tol);
        const ShiftField2D half = trace_vp(e0, grid, 0.5 * dt, vp_substeps(e0, grid, 0.5 * dt));
        const ModelStep stage1 = model_step_2d(t, bp, f, half.xi, half.eta, grid);
        const Field fstar = t.value(stage1.u_next).to_field();
        const Field estar = poisson_periodic(vp_density(fstar, grid), grid.x_grid(), poisson_tol);
        const ShiftField2D full = trace_vp(estar, grid, dt, vp_substeps(estar, grid, dt));
        const ModelStep stage2 = model_step_2d(t, bp, f, full.xi, full.eta, grid);
        f = stage2.u_next;
        const int step_loss = mse(t, f, leaf(t, Tensor::from_field(w.refs[k])));
        total = total < 0 ? step_loss : add(t, total, step_loss);
    }
    return scale(t, total, 1.0 / static_cast<double>(w.refs.size()));
}

inline TrainResult train_unrolled(const ModelParams& init, const Grid2D& grid,
                                  const std::vector<RolloutWindow>& windows,
                                  const TrainOptions& opt) {
    require(!windows.empty(), "train_unrolled: no rollout windows");
    TrainResult res;
    res.params = init;
    if (opt.epochs == 0) return res;

    const int n_val = opt.val_fraction > 0.0 && windows.size() > 1
                          ? std::max(1, static_cast<int>(std::floor(opt.val_fraction *
                                                                    static_cast<double>(windows.size()))))
                          : 0;
    std::vector<int> train_idx, val_idx;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (static_cast<int>(i) >= static_cast<int>(windows.size()) - n_val)
            val_idx.push_back(static_cast<int>(i));
        else
            train_idx.push_back(static_cast<int>(i));
    }

    auto window_loss = [&](const ModelParams& params, const RolloutWindow& w,
                           std::vector<Tensor>* grads) {
        Tape t;
        BoundParams bp = bind_params(t, params);
        const int loss = rollout_rkei2_loss(t, bp, grid, w);
        const double value = t.value(loss)[0];
        if (grads) {
            t.backward(loss);
            grads->clear();
            for (int id : bp.ids) grads->push_back(t.grad(id));
        }
        return value;
    };

    ModelParams current = init;
    AdamState adam;
    adam.lr = opt.lr;
    double best = 1e300;
    ModelParams best_params = current;
    int best_epoch = -1;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng erng = Rng::substream(opt.seed, 0x20000 + static_cast<std::uint64_t>(epoch));
        std::vector<int> order = train_idx;
        detail::shuffle_indices(order, erng);
        double epoch_loss = 0.0;
        int count = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opt.batch_pairs)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(opt.batch_pairs));
            const int bsize = static_cast<int>(stop - start);
            std::vector<std::vector<Tensor>> grads(bsize);
            std::vector<double> losses(bsize, 0.0);
            parallel_for(bsize, [&](int b) {
                losses[b] = window_loss(current, windows[order[start + b]], &grads[b]);
            });
            std::vector<Tensor> grad_sum = grads[0];
            for (int b = 1; b < bsize; ++b)
                for (std::size_t p = 0; p < grad_sum.size(); ++p)
                    for (std::size_t i = 0; i < grad_sum[p].numel(); ++i)
                        grad_sum[p][i] += grads[b][p][i];
            for (auto& gten : grad_sum)
                for (double& v : gten.data) v /= bsize;
            for (double l : losses) {
                if (!std::isfinite(l)) throw std::runtime_error("train_unrolled: loss diverged");
                epoch_loss += l;
                ++count;
            }
            adam_step(current.tensors, grad_sum, adam);
        }
        res.train_loss.push_back(epoch_loss / std::max(1, count));

        double monitored = res.train_loss.back();
        if (!val_idx.empty()) {
            double v = 0.0;
            for (int i : val_idx) v += window_loss(current, windows[i], nullptr);
            monitored = v / static_cast<double>(val_idx.size());
            res.val_loss.push_back(monitored);
        }
        if (!std::isfinite(monitored)) throw std::runtime_error("train_unrolled: loss diverged");
        if (monitored < best) {
            best = monitored;
            best_params = current;
            best_epoch = epoch;
        } else if (epoch - best_epoch > opt.patience) {
            break;
        }
    }
    res.params = best_epoch >= 0 ? best_params : current;
    res.best_epoch = best_epoch;
    return res;
}

// ---------------------------------------------------------------------------
// Evaluation: roll the model along held-out trajectories with their stored
// shifts; report per-step MSE, the relative mass deviation history, and the
// first-order baseline on the same inputs.

struct EvalOptions {
    bool with_baseline = true;
    double trained_cfl_min = 0.0, trained_cfl_max = 0.0;
};

inline ordered_json evaluate_model(const ModelParams& params,
                                   const std::vector<TrajectoryFile>& tests,
                                   const EvalOptions& opt,
                                   std::vector<double>* step_ms = nullptr) {
    require(!tests.empty(), "evaluate_model: no test trajectories");
    ordered_json report;
    report["kind"] = "report";
    report["format_version"] = 1;
    report["grid"] = tests[0].grid;
    report["problem"] = tests[0].problem;
    report["trained_cfl_range"] = {opt.trained_cfl_min, opt.trained_cfl_max};

    const int dim = tests[0].grid.at("dim").get<int>();
    Grid1D g1;
    Grid2D g2;
    if (dim == 1)
        g1 = grid1d_from_json(tests[0].grid);
    else
        g2 = grid2d_from_json(tests[0].grid);

    bool cfl_in_range = true;
    ordered_json traj_reports = ordered_json::array();
    double mass_dev_max = 0.0;
    double mean_final_mse = 0.0, mean_final_baseline = 0.0;

    for (std::size_t ti = 0; ti < tests.size(); ++ti) {
        const TrajectoryFile& t = tests[ti];
        if (opt.trained_cfl_max > 0.0 &&
            (t.cfl < opt.trained_cfl_min - 1e-12 || t.cfl > opt.trained_cfl_max + 1e-12))
            cfl_in_range = false;
        Field u = t.get("U", 0);
        Field ub = u;
        const double mass0 = u.sum();
        ordered_json mse_steps = ordered_json::array();
        ordered_json baseline_steps = ordered_json::array();
        ordered_json mass_dev = ordered_json::array();
        double final_mse = 0.0, final_baseline = 0.0;
        for (int m = 0; m + 1 < t.steps; ++m) {
            const Field xi = t.get("xi", m);
            const auto tic = std::chrono::steady_clock::now();
            if (dim == 1) {
                u = model_apply_1d(params, u, xi, g1);
            } else {
                const Field eta = t.get("eta", m);
                u = model_apply_2d(params, u, xi, eta, g2);
            }
            const auto toc = std::chrono::steady_clock::now();
            if (step_ms)
                step_ms->push_back(
                    std::chrono::duration<double, std::milli>(toc - tic).count());
            const Field ref = t.get("U", m + 1);
            double se = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i)
                se += (u[i] - ref[i]) * (u[i] - ref[i]);
            final_mse = se / static_cast<double>(u.size());
            mse_steps.push_back(final_mse);
            const double dev = std::fabs(u.sum() - mass0) / std::max(1e-300, std::fabs(mass0));
            mass_dev.push_back(dev);
            mass_dev_max = std::max(mass_dev_max, dev);
            if (opt.with_baseline) {
                if (dim == 1) {
                    ub = sl_fd_first_order(ub, xi, g1);
                } else {
                    const Field eta = t.get("eta", m);
                    ub = sl_first_order_2d(ub, xi, eta, g2);
                }
                double sb = 0.0;
                for (std::size_t i = 0; i < ub.size(); ++i)
                    sb += (ub[i] - ref[i]) * (ub[i] - ref[i]);
                final_baseline = sb / static_cast<double>(ub.size());
                baseline_steps.push_back(final_baseline);
            }
        }
        ordered_json tr;
        tr["trajectory"] = ti;
        tr["cfl"] = t.cfl;
        tr["dt"] = t.dt;
        tr["mse_per_step"] = mse_steps;
        if (opt.with_baseline) tr["baseline_mse_per_step"] = baseline_steps;
        tr["mass_rel_deviation"] = mass_dev;
        tr["final_mse"] = final_mse;
        if (opt.with_baseline) tr["final_baseline_mse"] = final_baseline;
        traj_reports.push_back(std::move(tr));
        mean_final_mse += final_mse;
        mean_final_baseline += final_baseline;
    }
    report["cfl_in_range"] = cfl_in_range;
    report["trajectories"] = traj_reports;
    report["summary"] =
        ordered_json{{"mean_final_mse", mean_final_mse / static_cast<double>(tests.size())},
                     {"mean_final_baseline_mse",
                      opt.with_baseline ? mean_final_baseline / static_cast<double>(tests.size())
                                        : 0.0},
                     {"mass_deviation_max", mass_dev_max}};
    return report;
}

} // namespace slgraph
