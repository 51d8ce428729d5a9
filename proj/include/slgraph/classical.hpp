// Classical reference and baseline solvers: WENO5 finite differences with
// SSPRK3 time stepping (1D, 2D, phase-space Vlasov) and the first-order
// conservative semi-Lagrangian finite-difference scheme.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "slgraph/characteristics.hpp"
#include "slgraph/grid.hpp"
#include "slgraph/poisson.hpp"
#include "slgraph/problems.hpp"

namespace slgraph {

inline constexpr double kWenoEps = 1e-6;

// Fifth-order WENO reconstruction of the upwind-biased interface value at
// x_{i+1/2} from point values {f_{i-2}, ..., f_{i+2}}. With `linear_weights`
// the nonlinear smoothness weighting is bypassed (exact for polynomials of
// degree <= 4).
inline double weno5_face(double fm2, double fm1, double f0, double fp1, double fp2,
                         bool linear_weights = false) {
    const double q0 = (2.0 * fm2 - 7.0 * fm1 + 11.0 * f0) / 6.0;
    const double q1 = (-fm1 + 5.0 * f0 + 2.0 * fp1) / 6.0;
    const double q2 = (2.0 * f0 + 5.0 * fp1 - fp2) / 6.0;
    if (linear_weights) return 0.1 * q0 + 0.6 * q1 + 0.3 * q2;

    const double b0 = (13.0 / 12.0) * (fm2 - 2.0 * fm1 + f0) * (fm2 - 2.0 * fm1 + f0) +
                      0.25 * (fm2 - 4.0 * fm1 + 3.0 * f0) * (fm2 - 4.0 * fm1 + 3.0 * f0);
    const double b1 = (13.0 / 12.0) * (fm1 - 2.0 * f0 + fp1) * (fm1 - 2.0 * f0 + fp1) +
                      0.25 * (fm1 - fp1) * (fm1 - fp1);
    const double b2 = (13.0 / 12.0) * (f0 - 2.0 * fp1 + fp2) * (f0 - 2.0 * fp1 + fp2) +
                      0.25 * (3.0 * f0 - 4.0 * fp1 + fp2) * (3.0 * f0 - 4.0 * fp1 + fp2);
    const double a0 = 0.1 / ((kWenoEps + b0) * (kWenoEps + b0));
    const double a1 = 0.6 / ((kWenoEps + b1) * (kWenoEps + b1));
    const double a2 = 0.3 / ((kWenoEps + b2) * (kWenoEps + b2));
    const double s = a0 + a1 + a2;
    return (a0 * q0 + a1 * q1 + a2 * q2) / s;
}

namespace detail {

// Flux-difference spatial operator for one line of a conservative advection
// term d/dx (vel * u), with global Lax-Friedrichs splitting. `vel[i]` is the
// velocity at point i, `alpha` the global splitting speed. Periodic lines
// wrap; non-periodic lines use zero ghost values. Writes -(Fhat_{i+1/2} -
// Fhat_{i-1/2})/h into out (accumulating).
inline void weno5_line_rhs(const std::vector<double>& u, const std::vector<double>& vel,
                           double alpha, double h, bool periodic, std::vector<double>& out) {
    const int n = static_cast<int>(u.size());
    // padded split fluxes with a 3-cell halo
    static thread_local std::vector<double> qp, qm, fh;
    qp.assign(n + 6, 0.0);
    qm.assign(n + 6, 0.0);
    for (int i = 0; i < n; ++i) {
        const double q = vel[i] * u[i];
        qp[i + 3] = 0.5 * (q + alpha * u[i]);
        qm[i + 3] = 0.5 * (q - alpha * u[i]);
    }
    if (periodic) {
        for (int k = 0; k < 3; ++k) {
            qp[k] = qp[n + k];
            qm[k] = qm[n + k];
            qp[n + 3 + k] = qp[3 + k];
            qm[n + 3 + k] = qm[3 + k];
        }
    }
    // Fhat at interfaces i+1/2 for i = -1..n-1 -> fh[i+1]
    fh.assign(n + 1, 0.0);
    for (int i = -1; i < n; ++i) {
        const int c = i + 3;
        const double fplus = weno5_face(qp[c - 2], qp[c - 1], qp[c], qp[c + 1], qp[c + 2]);
        const double fminus = weno5_face(qm[c + 3], qm[c + 2], qm[c + 1], qm[c], qm[c - 1]);
        fh[i + 1] = fplus + fminus;
    }
    for (int i = 0; i < n; ++i) out[i] -= (fh[i + 1] - fh[i]) / h;
}

} // namespace detail

// Spatial operator L(u, t) = -d/dx(a u) for the 1D conservative advection
// equation, WENO5 with global Lax-Friedrichs splitting on a periodic grid.
inline Field weno5_rhs_1d(const Field& u, const VelocityField1D& v, const Grid1D& g, double t) {
    std::vector<double> vel(g.n);
    double alpha = 0.0;
    for (int i = 0; i < g.n; ++i) {
        vel[i] = v.a(g.coordinate(i), t);
        alpha = std::max(alpha, std::fabs(vel[i]));
    }
    std::vector<double> rhs(g.n, 0.0);
    detail::weno5_line_rhs(u.values, vel, alpha, g.h, true, rhs);
    Field out(static_cast<std::size_t>(g.n));
    out.values = std::move(rhs);
    return out;
}

inline double max_speed_1d(const VelocityField1D& v, const Grid1D& g, double t) {
    double m = 0.0;
    for (int i = 0; i < g.n; ++i) m = std::max(m, std::fabs(v.a(g.coordinate(i), t)));
    return m;
}

// One SSPRK3 step of u_t + (a u)_x = 0. Enforces the Eulerian CFL limit.
inline Field weno5_advect_step_1d(const Field& u, const VelocityField1D& v, const Grid1D& g,
                                  double t, double dt, double cfl_limit = 0.6) {
    const double amax = std::max(max_speed_1d(v, g, t), max_speed_1d(v, g, t + dt));
    if (amax * dt / g.h > cfl_limit + 1e-12)
        throw std::invalid_argument("weno5_advect_step_1d: CFL violation");
    const int n = g.n;
    Field u1(u), u2(u), out(u);
    Field k = weno5_rhs_1d(u, v, g, t);
    for (int i = 0; i < n; ++i) u1[i] = u[i] + dt * k[i];
    k = weno5_rhs_1d(u1, v, g, t + dt);
    for (int i = 0; i < n; ++i) u2[i] = 0.75 * u[i] + 0.25 * (u1[i] + dt * k[i]);
    k = weno5_rhs_1d(u2, v, g, t + 0.5 * dt);
    for (int i = 0; i < n; ++i) out[i] = (u[i] + 2.0 * (u2[i] + dt * k[i])) / 3.0;
    return out;
}

// 2D flux-form spatial operator, dimension-by-dimension WENO5: both flux
// divergence terms are evaluated in the same stage (no splitting in space).
inline Field weno5_rhs_2d(const Field& u, const VelocityField2D& v, const Grid2D& g, double t) {
    std::vector<double> ax(static_cast<std::size_t>(g.size())), by(static_cast<std::size_t>(g.size()));
    double alpha_x = 0.0, alpha_y = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, y] = g.coordinate(i, j);
            const int p = g.node(i, j);
            ax[p] = v.a(x, y, t);
            by[p] = v.b(x, y, t);
            alpha_x = std::max(alpha_x, std::fabs(ax[p]));
            alpha_y = std::max(alpha_y, std::fabs(by[p]));
        }
    Field out(static_cast<std::size_t>(g.size()), 0.0);
    std::vector<double> line(g.nx), lvel(g.nx), lrhs(g.nx);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            line[i] = u[g.node(i, j)];
            lvel[i] = ax[g.node(i, j)];
        }
        std::fill(lrhs.begin(), lrhs.end(), 0.0);
        detail::weno5_line_rhs(line, lvel, alpha_x, g.hx, true, lrhs);
        for (int i = 0; i < g.nx; ++i) out[g.node(i, j)] += lrhs[i];
    }
    std::vector<double> col(g.ny), cvel(g.ny), crhs(g.ny);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            col[j] = u[g.node(i, j)];
            cvel[j] = by[g.node(i, j)];
        }
        std::fill(crhs.begin(), crhs.end(), 0.0);
        detail::weno5_line_rhs(col, cvel, alpha_y, g.hy, g.y_periodic, crhs);
        for (int j = 0; j < g.ny; ++j) out[g.node(i, j)] += crhs[j];
    }
    return out;
}

inline std::pair<double, double> max_speed_2d(const VelocityField2D& v, const Grid2D& g, double t) {
    double mx = 0.0, my = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, y] = g.coordinate(i, j);
            mx = std::max(mx, std::fabs(v.a(x, y, t)));
            my = std::max(my, std::fabs(v.b(x, y, t)));
        }
    return {mx, my};
}

inline Field weno5_advect_step_2d(const Field& u, const VelocityField2D& v, const Grid2D& g,
                                  double t, double dt, double cfl_limit = 0.6) {
    auto [mx0, my0] = max_speed_2d(v, g, t);
    auto [mx1, my1] = max_speed_2d(v, g, t + dt);
    const double cfl = dt * (std::max(mx0, mx1) / g.hx + std::max(my0, my1) / g.hy);
    if (cfl > cfl_limit + 1e-12)
        throw std::invalid_argument("weno5_advect_step_2d: CFL violation");
    const int n = g.size();
    Field u1(u), u2(u), out(u);
    Field k = weno5_rhs_2d(u, v, g, t);
    for (int i = 0; i < n; ++i) u1[i] = u[i] + dt * k[i];
    k = weno5_rhs_2d(u1, v, g, t + dt);
    for (int i = 0; i < n; ++i) u2[i] = 0.75 * u[i] + 0.25 * (u1[i] + dt * k[i]);
    k = weno5_rhs_2d(u2, v, g, t + 0.5 * dt);
    for (int i = 0; i < n; ++i) out[i] = (u[i] + 2.0 * (u2[i] + dt * k[i])) / 3.0;
    return out;
}

// ---------------------------------------------------------------------------
// Vlasov-Poisson reference discretization (Eulerian substitute data
// generator): WENO5 in x and v, SSPRK3 in time, E recomputed from Poisson at
// every stage.

// rho_i = h_v * sum_j f_ij (rectangle rule; f ~ 0 at the velocity boundary).
inline Field vp_density(const Field& f, const Grid2D& g) {
    require(static_cast<int>(f.size()) == g.size(), "vp_density: size mismatch");
    Field rho(static_cast<std::size_t>(g.nx), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) rho[i] += f[g.node(i, j)];
    for (int i = 0; i < g.nx; ++i) rho[i] *= g.hy;
    return rho;
}

inline Field vlasov_rhs(const Field& f, const Grid2D& g, const Field& E) {
    Field out(static_cast<std::size_t>(g.size()), 0.0);
    double alpha_x = 0.0, alpha_v = 0.0;
    for (int j = 0; j < g.ny; ++j) alpha_x = std::max(alpha_x, std::fabs(g.y_min + j * g.hy));
    for (int i = 0; i < g.nx; ++i) alpha_v = std::max(alpha_v, std::fabs(E[i]));
    // x-transport at speed v_j along each row
    std::vector<double> line(g.nx), lvel(g.nx), lrhs(g.nx);
    for (int j = 0; j < g.ny; ++j) {
        const double vj = g.y_min + j * g.hy;
        for (int i = 0; i < g.nx; ++i) {
            line[i] = f[g.node(i, j)];
            lvel[i] = vj;
        }
        std::fill(lrhs.begin(), lrhs.end(), 0.0);
        detail::weno5_line_rhs(line, lvel, alpha_x, g.hx, true, lrhs);
        for (int i = 0; i < g.nx; ++i) out[g.node(i, j)] += lrhs[i];
    }
    // v-transport at speed E_i along each column, zero ghost values
    std::vector<double> col(g.ny), cvel(g.ny), crhs(g.ny);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            col[j] = f[g.node(i, j)];
            cvel[j] = E[i];
        }
        std::fill(crhs.begin(), crhs.end(), 0.0);
        detail::weno5_line_rhs(col, cvel, alpha_v, g.hy, false, crhs);
        for (int j = 0; j < g.ny; ++j) out[g.node(i, j)] += crhs[j];
    }
    return out;
}

// One SSPRK3 step of the full nonlinear VP system at fine resolution.
inline Field vlasov_reference_step(const Field& f, const Grid2D& g, double dt,
                                   double cfl_limit = 0.6, double poisson_tol = 1e-8) {
    Field E = poisson_periodic(vp_density(f, g), g.x_grid(), poisson_tol);
    double emax = 0.0;
    for (double e : E.values) emax = std::max(emax, std::fabs(e));
    const double vmax = std::max(std::fabs(g.y_min), std::fabs(g.y_max));
    if (dt * (vmax / g.hx + emax / g.hy) > cfl_limit + 1e-12)
        throw std::invalid_argument("vlasov_reference_step: CFL violation");
    const int n = g.size();
    Field u1(f), u2(f), out(f);
    Field k = vlasov_rhs(f, g, E);
    for (int i = 0; i < n; ++i) u1[i] = f[i] + dt * k[i];
    E = poisson_periodic(vp_density(u1, g), g.x_grid(), poisson_tol);
    k = vlasov_rhs(u1, g, E);
    for (int i = 0; i < n; ++i) u2[i] = 0.75 * f[i] + 0.25 * (u1[i] + dt * k[i]);
    E = poisson_periodic(vp_density(u2, g), g.x_grid(), poisson_tol);
    k = vlasov_rhs(u2, g, E);
    for (int i = 0; i < n; ++i) out[i] = (f[i] + 2.0 * (u2[i] + dt * k[i])) / 3.0;
    return out;
}

// Suggested stable step for the reference VP solver at a given CFL.
inline double vlasov_reference_dt(const Field& f, const Grid2D& g, double cfl,
                                  double poisson_tol = 1e-8) {
    Field E = poisson_periodic(vp_density(f, g), g.x_grid(), poisson_tol);
    double emax = 0.0;
    for (double e : E.values) emax = std::max(emax, std::fabs(e));
    const double vmax = std::max(std::fabs(g.y_min), std::fabs(g.y_max));
    return cfl / (vmax / g.hx + emax / g.hy);
}

// ---------------------------------------------------------------------------
// First-order conservative semi-Lagrangian finite-difference update,
// generalized to arbitrary CFL by integer-shift decomposition. With
// xi_i = -(s_i + theta_i), s_i integer and theta_i in [0,1), the numerical
// flux through x_{i+1/2} (in units of h) is
//   Fhat_i = sum_{r=i-s_i+1}^{i} U_r + theta_i * U_{i-s_i},
// where an inverted range counts negatively. The update
//   U_i <- U_i - (Fhat_i - Fhat_{i-1})
// telescopes, so the total mass is conserved exactly for any shift field.
inline Field sl_fd_first_order(const Field& u, const Field& xi, const Grid1D& g) {
    require(u.size() == xi.size() && static_cast<int>(u.size()) == g.n,
            "sl_fd_first_order: size mismatch");
    const int n = g.n;
    std::vector<double> fhat(n);
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(xi[i])) throw std::invalid_argument("sl_fd_first_order: non-finite shift");
        const double m = -xi[i];
        const long long s = static_cast<long long>(std::floor(m));
        const double theta = m - static_cast<double>(s);
        double F = theta * u[g.wrap(static_cast<int>(i - s))];
        if (s > 0)
            for (long long r = i - s + 1; r <= i; ++r) F += u[g.wrap(static_cast<int>(r))];
        else if (s < 0)
            for (long long r = i + 1; r <= i - s; ++r) F -= u[g.wrap(static_cast<int>(r))];
        fhat[i] = F;
    }
    Field out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = u[i] - (fhat[i] - fhat[g.wrap(i - 1)]);
    return out;
}

} // namespace slgraph
