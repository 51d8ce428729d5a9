// Velocity fields and randomized initial-condition samplers for the
// benchmark transport and Vlasov-Poisson experiments.
#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "slgraph/grid.hpp"
#include "slgraph/rng.hpp"

namespace slgraph {

struct VelocityField1D {
    std::string tag;
    std::function<double(double x, double t)> a;
};

struct VelocityField2D {
    std::string tag;
    std::function<double(double x, double y, double t)> a;
    std::function<double(double x, double y, double t)> b;
};

inline VelocityField1D constant_velocity(double c) {
    return {"constant", [c](double, double) { return c; }};
}

// a(x,t) = sin(x+t) on [0, 2*pi].
inline VelocityField1D sinusoidal_velocity() {
    return {"sinusoidal", [](double x, double t) { return std::sin(x + t); }};
}

inline VelocityField2D constant_velocity_2d(double cx, double cy) {
    return {"constant",
            [cx](double, double, double) { return cx; },
            [cy](double, double, double) { return cy; }};
}

// Periodic swirling deformation flow on [0,1]^2; reverses at t = T/2 and
// returns the solution to its initial state at t = T.
inline double eval_swirl_a(double x, double y, double t, double T) {
    const double s = std::sin(kPi * x);
    return s * s * std::sin(2.0 * kPi * y) * std::cos(kPi * t / T);
}

inline double eval_swirl_b(double x, double y, double t, double T) {
    const double s = std::sin(kPi * y);
    return -s * s * std::sin(2.0 * kPi * x) * std::cos(kPi * t / T);
}

inline VelocityField2D swirl_velocity(double T) {
    return {"swirl",
            [T](double x, double y, double t) { return eval_swirl_a(x, y, t, T); },
            [T](double x, double y, double t) { return eval_swirl_b(x, y, t, T); }};
}

// ---------------------------------------------------------------------------
// Profile evaluators.

// Distance from x to c reduced modulo the period L into [0, L/2].
inline double periodic_distance(double x, double c, double L) {
    double d = std::fabs(x - c);
    d -= L * std::floor(d / L);
    return d > 0.5 * L ? L - d : d;
}

inline double eval_square(double x, double height, double width, double center, double L) {
    return periodic_distance(x, center, L) <= 0.5 * width ? height : 0.0;
}

// Symmetric tent with peak `height` over a base of length `width`.
inline double eval_triangle(double x, double height, double width, double center, double L) {
    const double d = periodic_distance(x, center, L);
    const double v = height * (1.0 - 2.0 * d / width);
    return v > 0.0 ? v : 0.0;
}

inline double eval_cosine_bell(double x, double y, double r0, double cx, double cy) {
    const double r = std::min(1.0, r0 * std::hypot(x - cx, y - cy));
    return 0.5 * (1.0 + std::cos(kPi * r));
}

inline double eval_two_bell(double x, double y, double r0, double c1x, double c1y, double c2x,
                            double c2y) {
    const double r1 = std::min(1.0, r0 * std::hypot(x - c1x, y - c1y));
    const double r2 = std::min(1.0, r0 * std::hypot(x - c2x, y - c2y));
    return 0.5 * (1.0 + std::cos(kPi * r1) + std::cos(kPi * r2));
}

inline double eval_landau(double x, double v, double alpha, double k) {
    return (1.0 / std::sqrt(2.0 * kPi)) * (1.0 + alpha * std::cos(k * x)) *
           std::exp(-0.5 * v * v);
}

inline double eval_two_stream(double x, double v, double alpha, double k) {
    return (1.0 / std::sqrt(2.0 * kPi)) * (1.0 + alpha * std::cos(k * x)) * v * v *
           std::exp(-0.5 * v * v);
}

inline double eval_multi_mode(double x, double v, double a1, double a2, double a3, double k) {
    return (2.0 / (7.0 * std::sqrt(2.0 * kPi))) * (1.0 + 5.0 * v * v) *
           (1.0 + a1 * std::cos(k * x) + a2 * std::cos(2.0 * k * x) + a3 * std::cos(3.0 * k * x)) *
           std::exp(-0.5 * v * v);
}

// ---------------------------------------------------------------------------
// Randomized samplers. Draw order is part of the on-disk reproducibility
// contract; do not reorder.

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
    bool fixed() const { return lo == hi; }
};

struct SquareWaveParams {
    double height, width, center;
};

inline SquareWaveParams sample_square(Rng& rng, Range height, Range width, Range center) {
    SquareWaveParams p{};
    p.height = height.sample(rng);
    p.width = width.sample(rng);
    p.center = center.sample(rng);
    return p;
}

inline Field make_square_wave(const Grid1D& g, const SquareWaveParams& p) {
    Field f(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i)
        f[i] = eval_square(g.coordinate(i), p.height, p.width, p.center, g.length());
    return f;
}

struct TriangleSquareParams {
    double tri_height, tri_width, sq_height, sq_width;
    double tri_center, sq_center;
};

// One tent plus one square wave. The paper never places the two shapes;
// centers sit at the quarter points so the profiles do not superpose.
// Heights and widths are drawn independently per shape.
inline TriangleSquareParams sample_triangle_square(Rng& rng, Range height, Range width,
                                                   const Grid1D& g) {
    TriangleSquareParams p{};
    p.tri_height = height.sample(rng);
    p.tri_width = width.sample(rng);
    p.sq_height = height.sample(rng);
    p.sq_width = width.sample(rng);
    p.tri_center = g.x_min + 0.25 * g.length();
    p.sq_center = g.x_min + 0.75 * g.length();
    return p;
}

inline Field make_triangle_square(const Grid1D& g, const TriangleSquareParams& p) {
    Field f(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        const double x = g.coordinate(i);
        f[i] = eval_triangle(x, p.tri_height, p.tri_width, p.tri_center, g.length()) +
               eval_square(x, p.sq_height, p.sq_width, p.sq_center, g.length());
    }
    return f;
}

struct CosineBellParams {
    double r0, cx, cy;
};

inline CosineBellParams sample_cosine_bell(Rng& rng, Range r0, Range cx, Range cy) {
    CosineBellParams p{};
    p.r0 = r0.sample(rng);
    p.cx = cx.sample(rng);
    p.cy = cy.sample(rng);
    return p;
}

inline Field make_cosine_bell(const Grid2D& g, const CosineBellParams& p) {
    Field f(static_cast<std::size_t>(g.size()));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, y] = g.coordinate(i, j);
            f[g.node(i, j)] = eval_cosine_bell(x, y, p.r0, p.cx, p.cy);
        }
    return f;
}

struct SquareWave2DParams {
    double height, width, cx, cy;
};

// Centered at the domain midpoint; only height and width are randomized.
inline SquareWave2DParams sample_square_2d(Rng& rng, Range height, Range width, const Grid2D& g) {
    SquareWave2DParams p{};
    p.height = height.sample(rng);
    p.width = width.sample(rng);
    p.cx = 0.5 * (g.x_min + g.x_max);
    p.cy = 0.5 * (g.y_min + g.y_max);
    return p;
}

inline Field make_square_wave_2d(const Grid2D& g, const SquareWave2DParams& p) {
    Field f(static_cast<std::size_t>(g.size()));
    const double Lx = g.x_max - g.x_min, Ly = g.y_max - g.y_min;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, y] = g.coordinate(i, j);
            const bool inside = periodic_distance(x, p.cx, Lx) <= 0.5 * p.width &&
                                periodic_distance(y, p.cy, Ly) <= 0.5 * p.width;
            f[g.node(i, j)] = inside ? p.height : 0.0;
        }
    return f;
}

// ---------------------------------------------------------------------------
// Vlasov-Poisson initial states on a (x, v) phase-space grid.

enum class VPFamily { Landau, TwoStream, MultiModeTwoStream };

struct VPInitParams {
    VPFamily family = VPFamily::Landau;
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
    double k = 0.5;
};

inline VPInitParams sample_vp_init(Rng& rng, VPFamily family, Range alpha, double k) {
    VPInitParams p{};
    p.family = family;
    p.k = k;
    p.alpha1 = alpha.sample(rng);
    if (family == VPFamily::MultiModeTwoStream) {
        p.alpha2 = alpha.sample(rng);
        p.alpha3 = alpha.sample(rng);
    }
    return p;
}

inline double eval_vp_init(const VPInitParams& p, double x, double v) {
    switch (p.family) {
        case VPFamily::Landau: return eval_landau(x, v, p.alpha1, p.k);
        case VPFamily::TwoStream: return eval_two_stream(x, v, p.alpha1, p.k);
        case VPFamily::MultiModeTwoStream:
            return eval_multi_mode(x, v, p.alpha1, p.alpha2, p.alpha3, p.k);
    }
    return 0.0;
}

// Evaluates f on the phase-space grid and rescales so the discrete mean
// density is exactly 1 (charge neutrality with the fixed ion background;
// the truncated Maxwellian tail otherwise leaves a ~1e-10 deficit that the
// periodic Poisson solve cannot absorb).
inline Field make_vp_init(const Grid2D& g, const VPInitParams& p) {
    Field f(static_cast<std::size_t>(g.size()));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            auto [x, v] = g.coordinate(i, j);
            f[g.node(i, j)] = eval_vp_init(p, x, v);
        }
    const double mean_rho = f.sum() * g.hy / g.nx;
    if (mean_rho > 0.0)
        for (double& v : f.values) v /= mean_rho;
    return f;
}

} // namespace slgraph
