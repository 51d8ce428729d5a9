// Backward-in-time characteristic tracing from grid points over one step,
// producing upstream displacements as normalized shifts.
#pragma once

#include <cmath>
#include <stdexcept>

#include "slgraph/grid.hpp"
#include "slgraph/problems.hpp"

namespace slgraph {

struct ShiftField1D {
    Field xi; // upstream displacement in units of h
};

struct ShiftField2D {
    Field xi;  // units of hx
    Field eta; // units of hy
    int clamped = 0; // upstream points pushed back into a non-periodic axis
};

// Internal substep count giving effective CFL <= 0.25 per substep, keeping
// the ODE error far below the discretization error at large time steps.
inline int default_substeps(double cfl) {
    const double c = std::fabs(cfl);
    return c <= 0.25 ? 1 : static_cast<int>(std::ceil(4.0 * c));
}

// Classical 4th-order one-step integration of the displacement
// d(delta)/dt = a(x0 + delta, t), from t_end backward over dt_total.
// Integrating the displacement rather than the position keeps constant
// fields exact to roundoff of the final division by h.
inline double trace_point_1d(const VelocityField1D& v, double x0, double t_end, double dt_total,
                             int substeps) {
    const double dt = -dt_total / substeps;
    double delta = 0.0;
    double t = t_end;
    for (int s = 0; s < substeps; ++s) {
        const double k1 = v.a(x0 + delta, t);
        const double k2 = v.a(x0 + delta + 0.5 * dt * k1, t + 0.5 * dt);
        const double k3 = v.a(x0 + delta + 0.5 * dt * k2, t + 0.5 * dt);
        const double k4 = v.a(x0 + delta + dt * k3, t + dt);
        delta += dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        t += dt;
    }
    if (!std::isfinite(delta)) throw std::runtime_error("trace_point_1d: non-finite velocity");
    return delta;
}

inline ShiftField1D trace_1d(const VelocityField1D& v, const Grid1D& g, double t_end,
                             double dt_total, int substeps) {
    require(dt_total > 0.0, "trace_1d: dt must be positive");
    require(substeps >= 1, "trace_1d: substeps must be >= 1");
    ShiftField1D out;
    out.xi = Field(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i)
        out.xi[i] = trace_point_1d(v, g.coordinate(i), t_end, dt_total, substeps) / g.h;
    return out;
}

struct Displacement2D {
    double dx = 0.0, dy = 0.0;
};

inline Displacement2D trace_point_2d(const VelocityField2D& v, double x0, double y0, double t_end,
                                     double dt_total, int substeps) {
    const double dt = -dt_total / substeps;
    Displacement2D d;
    double t = t_end;
    for (int s = 0; s < substeps; ++s) {
        const double k1x = v.a(x0 + d.dx, y0 + d.dy, t);
        const double k1y = v.b(x0 + d.dx, y0 + d.dy, t);
        const double k2x = v.a(x0 + d.dx + 0.5 * dt * k1x, y0 + d.dy + 0.5 * dt * k1y, t + 0.5 * dt);
        const double k2y = v.b(x0 + d.dx + 0.5 * dt * k1x, y0 + d.dy + 0.5 * dt * k1y, t + 0.5 * dt);
        const double k3x = v.a(x0 + d.dx + 0.5 * dt * k2x, y0 + d.dy + 0.5 * dt * k2y, t + 0.5 * dt);
        const double k3y = v.b(x0 + d.dx + 0.5 * dt * k2x, y0 + d.dy + 0.5 * dt * k2y, t + 0.5 * dt);
        const double k4x = v.a(x0 + d.dx + dt * k3x, y0 + d.dy + dt * k3y, t + dt);
        const double k4y = v.b(x0 + d.dx + dt * k3x, y0 + d.dy + dt * k3y, t + dt);
        d.dx += dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0;
        d.dy += dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0;
        t += dt;
    }
    if (!std::isfinite(d.dx) || !std::isfinite(d.dy))
        throw std::runtime_error("trace_point_2d: non-finite velocity");
    return d;
}

inline ShiftField2D trace_2d(const VelocityField2D& v, const Grid2D& g, double t_end,
                             double dt_total, int substeps) {
    require(dt_total > 0.0, "trace_2d: dt must be positive");
    require(substeps >= 1, "trace_2d: substeps must be >= 1");
    ShiftField2D out;
    out.xi = Field(static_cast<std::size_t>(g.size()));
    out.eta = Field(static_cast<std::size_t>(g.size()));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, y] = g.coordinate(i, j);
            const Displacement2D d = trace_point_2d(v, x, y, t_end, dt_total, substeps);
            out.xi[g.node(i, j)] = d.dx / g.hx;
            out.eta[g.node(i, j)] = d.dy / g.hy;
        }
    return out;
}

// Cubic Lagrange interpolation on the 4 nearest periodic grid points.
inline double interp_cubic_periodic(const Field& values, const Grid1D& g, double x) {
    double s = (x - g.x_min) / g.h;
    s -= g.n * std::floor(s / g.n);
    int j = static_cast<int>(std::floor(s));
    if (j >= g.n) j -= g.n;
    const double t = s - j;
    const double f0 = values[g.wrap(j - 1)];
    const double f1 = values[j];
    const double f2 = values[g.wrap(j + 1)];
    const double f3 = values[g.wrap(j + 2)];
    const double l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    const double l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    const double l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    const double l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    return l0 * f0 + l1 * f1 + l2 * f2 + l3 * f3;
}

// Velocity field of the Vlasov equation with the electric field frozen:
// dx/dt = v, dv/dt = E(x).
inline VelocityField2D frozen_vp_velocity(const Field& E, const Grid1D& xgrid) {
    return {"frozen-vp",
            [](double, double v, double) { return v; },
            [E, xgrid](double x, double, double) { return interp_cubic_periodic(E, xgrid, x); }};
}

// Traces the frozen-field Vlasov characteristics backward over dt. Upstream
// velocities leaving the truncated domain are clamped to its edge and
// counted (the solution is ~0 there by construction of the truncation).
inline ShiftField2D trace_vp(const Field& E, const Grid2D& g, double dt_total, int substeps) {
    require(static_cast<int>(E.size()) == g.nx, "trace_vp: E must live on the x-grid");
    require(dt_total > 0.0, "trace_vp: dt must be positive");
    require(substeps >= 1, "trace_vp: substeps must be >= 1");
    const VelocityField2D v = frozen_vp_velocity(E, g.x_grid());
    ShiftField2D out;
    out.xi = Field(static_cast<std::size_t>(g.size()));
    out.eta = Field(static_cast<std::size_t>(g.size()));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, vel] = g.coordinate(i, j);
            const Displacement2D d = trace_point_2d(v, x, vel, 0.0, dt_total, substeps);
            double v_up = vel + d.dy;
            if (v_up < g.y_min) {
                v_up = g.y_min;
                ++out.clamped;
            } else if (v_up > g.y_max) {
                v_up = g.y_max;
                ++out.clamped;
            }
            out.xi[g.node(i, j)] = d.dx / g.hx;
            out.eta[g.node(i, j)] = (v_up - vel) / g.hy;
        }
    return out;
}

// Substep default for VP tracing from the per-axis shift magnitudes.
inline int vp_substeps(const Field& E, const Grid2D& g, double dt) {
    double emax = 0.0;
    for (double e : E.values) emax = std::max(emax, std::fabs(e));
    const double vmax = std::max(std::fabs(g.y_min), std::fabs(g.y_max));
    const double cfl = std::max(vmax * dt / g.hx, emax * dt / g.hy);
    return default_substeps(cfl);
}

} // namespace slgraph
