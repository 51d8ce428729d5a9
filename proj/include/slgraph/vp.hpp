// Nonlinear Vlasov-Poisson driver: density and field computation, RKEI-1
// and RKEI-2 stepping over a conservative semi-Lagrangian evolution
// operator, and run diagnostics.
#pragma once

#include <functional>
#include <ostream>

#include "slgraph/characteristics.hpp"
#include "slgraph/classical.hpp"
#include "slgraph/graph.hpp"
#include "slgraph/grid.hpp"
#include "slgraph/model.hpp"
#include "slgraph/poisson.hpp"

namespace slgraph {

struct VPState {
    Grid2D grid;
    Field f;   // phase-space distribution
    Field rho; // density on the x-grid
    Field E;   // electric field on the x-grid, zero mean
    double t = 0.0;
};

inline VPState make_vp_state(const Grid2D& grid, Field f, double t = 0.0,
                             double poisson_tol = 1e-10) {
    VPState s;
    s.grid = grid;
    s.f = std::move(f);
    s.rho = vp_density(s.f, grid);
    s.E = poisson_periodic(s.rho, grid.x_grid(), poisson_tol);
    s.t = t;
    return s;
}

inline double phase_space_mass(const Field& f, const Grid2D& g) {
    return f.sum() * g.hx * g.hy;
}

// 0.5 * h_x * sum E_i^2.
inline double electric_energy(const Field& E, const Grid1D& g) {
    double s = 0.0;
    for (double e : E.values) s += e * e;
    return 0.5 * g.h * s;
}

// A conservative SL evolution operator for one frozen-field stage: takes the
// current distribution and the traced shifts, returns the evolved one.
using SLEvolve = std::function<Field(const Field& f, const ShiftField2D& shifts)>;

// Classical first-order conservative evolve (bilinear stencil weights plus
// the conservation correction).
inline SLEvolve baseline_evolve(const Grid2D& grid) {
    return [grid](const Field& f, const ShiftField2D& s) {
        return sl_first_order_2d(f, s.xi, s.eta, grid);
    };
}

// Learned evolve; `params` must outlive the returned callable.
inline SLEvolve model_evolve(const ModelParams& params, const Grid2D& grid) {
    return [&params, grid](const Field& f, const ShiftField2D& s) {
        return model_apply_2d(params, f, s.xi, s.eta, grid);
    };
}

// First-order RKEI: one stage with the field frozen at t^m. `override_E`
// replaces the self-consistent field (both stages in rkei2), for externally
// frozen-field studies.
inline VPState rkei1_step(const VPState& s, double dt, const SLEvolve& evolve,
                          double poisson_tol = 1e-10, const Field* override_E = nullptr) {
    const Field& e0 = override_E ? *override_E : s.E;
    const ShiftField2D shifts = trace_vp(e0, s.grid, dt, vp_substeps(e0, s.grid, dt));
    return make_vp_state(s.grid, evolve(s.f, shifts), s.t + dt, poisson_tol);
}

// Second-order RKEI. Stage one freezes E^m over dt/2 to produce the
// intermediate F*; stage two freezes the field E* computed from F* and
// evolves the ORIGINAL F^m over the full dt. The upstream graph inside the
// evolve is rebuilt for each stage. With an externally frozen field the two
// stages collapse and rkei2 equals rkei1 exactly.
inline VPState rkei2_step(const VPState& s, double dt, const SLEvolve& evolve,
                          double poisson_tol = 1e-10, const Field* override_E = nullptr) {
    const Field& e0 = override_E ? *override_E : s.E;
    const ShiftField2D half = trace_vp(e0, s.grid, 0.5 * dt, vp_substeps(e0, s.grid, 0.5 * dt));
    const Field f_star = evolve(s.f, half);
    Field e_star;
    if (override_E) {
        e_star = *override_E;
    } else {
        const Field rho_star = vp_density(f_star, s.grid);
        e_star = poisson_periodic(rho_star, s.grid.x_grid(), poisson_tol);
    }
    const ShiftField2D full = trace_vp(e_star, s.grid, dt, vp_substeps(e_star, s.grid, dt));
    return make_vp_state(s.grid, evolve(s.f, full), s.t + dt, poisson_tol);
}

inline void write_diagnostics_header(std::ostream& os) {
    os << "t,mass,electric_energy,min_f,max_f\n";
}

inline void write_diagnostics_row(std::ostream& os, const VPState& s) {
    double mn = s.f[0], mx = s.f[0];
    for (double v : s.f.values) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    os << s.t << ',' << phase_space_mass(s.f, s.grid) << ','
       << electric_energy(s.E, s.grid.x_grid()) << ',' << mn << ',' << mx << '\n';
}

} // namespace slgraph
