// Spectral solve of E_x = rho - 1 on a uniform periodic grid.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "slgraph/grid.hpp"
#include "slgraph/problems.hpp"

namespace slgraph {

// Solves E_x = rho - 1 with periodic boundary conditions by discrete Fourier
// transform: E_hat_k = rhs_hat_k / (i kappa_k) for k != 0, E_hat_0 = 0. The
// returned E has exactly zero mean. Throws when the compatibility condition
// mean(rho - 1) ~ 0 is violated beyond `tol`.
inline Field poisson_periodic(const Field& rho, const Grid1D& g, double tol = 1e-10) {
    require(static_cast<int>(rho.size()) == g.n, "poisson_periodic: size mismatch");
    const int n = g.n;
    std::vector<double> rhs(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        rhs[i] = rho[i] - 1.0;
        mean += rhs[i];
    }
    mean /= n;
    if (std::fabs(mean) > tol)
        throw std::runtime_error("poisson_periodic: mean(rho - 1) violates solvability");

    // Trig tables for theta = 2*pi*m/n.
    std::vector<double> ct(n), st(n);
    for (int m = 0; m < n; ++m) {
        const double th = 2.0 * kPi * m / n;
        ct[m] = std::cos(th);
        st[m] = std::sin(th);
    }

    const double L = g.length();
    Field E(static_cast<std::size_t>(n), 0.0);
    // rhs_i = sum_k A_k cos(kappa_k x_i) + B_k sin(kappa_k x_i); antiderivative
    // with zero mean is sum_k (A_k sin - B_k cos)/kappa_k. The Nyquist sine
    // vanishes on the grid, so that mode integrates to zero here.
    for (int k = 1; k <= (n - 1) / 2; ++k) {
        double A = 0.0, B = 0.0;
        for (int i = 0; i < n; ++i) {
            const int m = static_cast<int>((static_cast<long long>(k) * i) % n);
            A += rhs[i] * ct[m];
            B += rhs[i] * st[m];
        }
        A *= 2.0 / n;
        B *= 2.0 / n;
        const double kappa = 2.0 * kPi * k / L;
        for (int i = 0; i < n; ++i) {
            const int m = static_cast<int>((static_cast<long long>(k) * i) % n);
            E[i] += (A * st[m] - B * ct[m]) / kappa;
        }
    }
    return E;
}

} // namespace slgraph
