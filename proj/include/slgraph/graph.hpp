// Per-step directed donor->receiver graph connecting upstream stencil nodes
// to the grid points they update, with the bookkeeping needed for
// interpolation and exact conservation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "slgraph/grid.hpp"

namespace slgraph {

// Edges are grouped so that the S stencil edges of receiver i occupy slots
// [S*i, S*i + S) in canonical order (1D: left, right; 2D: SW, SE, NW, NE).
// Repair edges, when present, follow after all stencil edges.
struct UpstreamGraph {
    int num_nodes = 0;
    int stencil_size = 0;
    int nx = 0, ny = 1;
    double hx = 1.0, hy = 1.0;
    bool y_periodic = true;

    std::vector<int> edge_src;
    std::vector<int> edge_dst;

    // Upstream position of each receiver in index units (x/h), unwrapped,
    // and its local coordinate within the stencil cell.
    std::vector<double> up_x, up_y;
    std::vector<double> frac_x, frac_y;

    // Compressed out-neighborhoods: edge ids grouped by donor.
    std::vector<int> out_offsets;
    std::vector<int> out_edges;

    int repair_count = 0;

    int num_edges() const { return static_cast<int>(edge_src.size()); }
    int out_degree(int j) const { return out_offsets[j + 1] - out_offsets[j]; }
};

namespace detail {

inline void build_out_lists(UpstreamGraph& g) {
    g.out_offsets.assign(g.num_nodes + 1, 0);
    for (int s : g.edge_src) ++g.out_offsets[s + 1];
    for (int j = 0; j < g.num_nodes; ++j) g.out_offsets[j + 1] += g.out_offsets[j];
    g.out_edges.assign(g.edge_src.size(), 0);
    std::vector<int> cursor(g.out_offsets.begin(), g.out_offsets.end() - 1);
    for (int e = 0; e < g.num_edges(); ++e) g.out_edges[cursor[g.edge_src[e]]++] = e;
}

} // namespace detail

// Locates each upstream point x_i + xi_i*h in its containing cell
// (x_{j-1}, x_j] (right-closed, so a point exactly on a grid node takes the
// cell to its left) and connects the two cell endpoints to receiver i.
inline UpstreamGraph build_1d(const Field& xi, const Grid1D& grid) {
    require(static_cast<int>(xi.size()) == grid.n, "build_1d: shift/grid size mismatch");
    UpstreamGraph g;
    g.num_nodes = grid.n;
    g.stencil_size = 2;
    g.nx = grid.n;
    g.ny = 1;
    g.hx = grid.h;
    g.edge_src.resize(2 * static_cast<std::size_t>(grid.n));
    g.edge_dst.resize(2 * static_cast<std::size_t>(grid.n));
    g.up_x.resize(grid.n);
    g.frac_x.resize(grid.n);
    for (int i = 0; i < grid.n; ++i) {
        require(std::isfinite(xi[i]), "build_1d: non-finite shift");
        const double s = i + xi[i];
        const double cell = std::ceil(s);
        const int j = static_cast<int>(cell);
        g.up_x[i] = s;
        g.frac_x[i] = s - (cell - 1.0);
        g.edge_src[2 * i] = grid.wrap(j - 1);
        g.edge_src[2 * i + 1] = grid.wrap(j);
        g.edge_dst[2 * i] = i;
        g.edge_dst[2 * i + 1] = i;
    }
    detail::build_out_lists(g);
    return g;
}

// 2D analogue: the four corners of the cell containing the upstream point
// become donors, in canonical (SW, SE, NW, NE) order. A non-periodic y axis
// clamps the containing cell into the domain.
inline UpstreamGraph build_2d(const Field& xi, const Field& eta, const Grid2D& grid) {
    require(static_cast<int>(xi.size()) == grid.size() && xi.size() == eta.size(),
            "build_2d: shift/grid size mismatch");
    UpstreamGraph g;
    g.num_nodes = grid.size();
    g.stencil_size = 4;
    g.nx = grid.nx;
    g.ny = grid.ny;
    g.hx = grid.hx;
    g.hy = grid.hy;
    g.y_periodic = grid.y_periodic;
    const int n = g.num_nodes;
    g.edge_src.resize(4 * static_cast<std::size_t>(n));
    g.edge_dst.resize(4 * static_cast<std::size_t>(n));
    g.up_x.resize(n);
    g.up_y.resize(n);
    g.frac_x.resize(n);
    g.frac_y.resize(n);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const int p = grid.node(i, j);
            require(std::isfinite(xi[p]) && std::isfinite(eta[p]), "build_2d: non-finite shift");
            const double sx = i + xi[p];
            const double sy = j + eta[p];
            const double cellx = std::ceil(sx);
            int cx = static_cast<int>(cellx);
            double celly = std::ceil(sy);
            int cy = static_cast<int>(celly);
            if (!grid.y_periodic) {
                if (cy < 1) cy = 1;
                if (cy > grid.ny - 1) cy = grid.ny - 1;
                celly = cy;
            }
            g.up_x[p] = sx;
            g.up_y[p] = sy;
            g.frac_x[p] = sx - (cellx - 1.0);
            g.frac_y[p] = sy - (celly - 1.0);
            const int x0 = grid.wrap_x(cx - 1), x1 = grid.wrap_x(cx);
            const int y0 = grid.y_periodic ? grid.wrap_y(cy - 1) : cy - 1;
            const int y1 = grid.y_periodic ? grid.wrap_y(cy) : cy;
            g.edge_src[4 * p] = grid.node(x0, y0);
            g.edge_src[4 * p + 1] = grid.node(x1, y0);
            g.edge_src[4 * p + 2] = grid.node(x0, y1);
            g.edge_src[4 * p + 3] = grid.node(x1, y1);
            for (int c = 0; c < 4; ++c) g.edge_dst[4 * p + c] = p;
        }
    detail::build_out_lists(g);
    return g;
}

namespace detail {

// Physical distance from donor node j to the upstream point of receiver i,
// reduced over periodic axes.
inline double donor_to_upstream_dist(const UpstreamGraph& g, int donor, int receiver) {
    const int dx_i = donor % g.nx;
    const int dy_i = donor / g.nx;
    double ddx = g.up_x[receiver] - dx_i;
    ddx -= g.nx * std::floor(ddx / g.nx + 0.5); // nearest periodic image
    double dist2 = (ddx * g.hx) * (ddx * g.hx);
    if (g.ny > 1) {
        double ddy = g.up_y[receiver] - dy_i;
        if (g.y_periodic) ddy -= g.ny * std::floor(ddy / g.ny + 0.5);
        dist2 += (ddy * g.hy) * (ddy * g.hy);
    }
    return dist2;
}

} // namespace detail

// Every donor must influence at least one receiver or the per-donor
// conservation condition is vacuous and mass leaks. Donors with an empty
// out-list get one extra edge to the receiver whose upstream point lies
// nearest (ties to the lower receiver index).
inline UpstreamGraph repair_orphans(UpstreamGraph g) {
    std::vector<int> orphans;
    for (int j = 0; j < g.num_nodes; ++j)
        if (g.out_degree(j) == 0) orphans.push_back(j);
    for (int j : orphans) {
        int best = 0;
        double best_d = detail::donor_to_upstream_dist(g, j, 0);
        for (int i = 1; i < g.num_nodes; ++i) {
            const double d = detail::donor_to_upstream_dist(g, j, i);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        g.edge_src.push_back(j);
        g.edge_dst.push_back(best);
        ++g.repair_count;
    }
    if (!orphans.empty()) detail::build_out_lists(g);
    return g;
}

// U'_i = sum over incoming edges of c_e * U_src(e).
inline Field apply_coefficients(const UpstreamGraph& g, const std::vector<double>& coeffs,
                                const Field& u) {
    require(static_cast<int>(coeffs.size()) == g.num_edges(), "apply_coefficients: size mismatch");
    require(static_cast<int>(u.size()) == g.num_nodes, "apply_coefficients: field size mismatch");
    Field out(static_cast<std::size_t>(g.num_nodes), 0.0);
    for (int e = 0; e < g.num_edges(); ++e) out[g.edge_dst[e]] += coeffs[e] * u[g.edge_src[e]];
    return out;
}

// Equal-redistribution conservation correction: for donor j with out-degree
// q and raw coefficient sum s, every out-edge coefficient is shifted by
// (1 - s)/q, making each donor's coefficients sum to one.
inline void apply_conservation_constraint(const UpstreamGraph& g, std::vector<double>& coeffs) {
    for (int j = 0; j < g.num_nodes; ++j) {
        const int lo = g.out_offsets[j], hi = g.out_offsets[j + 1];
        require(hi > lo, "apply_conservation_constraint: donor with empty out-list");
        double s = 0.0;
        for (int k = lo; k < hi; ++k) s += coeffs[g.out_edges[k]];
        const double corr = (1.0 - s) / (hi - lo);
        for (int k = lo; k < hi; ++k) coeffs[g.out_edges[k]] += corr;
    }
}

// Classical first-order interpolation coefficients from the stencil-local
// coordinates: linear weights in 1D, bilinear in 2D. Repair edges get zero.
inline std::vector<double> classical_coefficients(const UpstreamGraph& g) {
    std::vector<double> c(static_cast<std::size_t>(g.num_edges()), 0.0);
    const int n = g.num_nodes;
    if (g.stencil_size == 2) {
        for (int i = 0; i < n; ++i) {
            const double t = g.frac_x[i];
            c[2 * i] = 1.0 - t;
            c[2 * i + 1] = t;
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const double tx = g.frac_x[i], ty = g.frac_y[i];
            c[4 * i] = (1.0 - tx) * (1.0 - ty);
            c[4 * i + 1] = tx * (1.0 - ty);
            c[4 * i + 2] = (1.0 - tx) * ty;
            c[4 * i + 3] = tx * ty;
        }
    }
    return c;
}

// Conservative first-order SL update on a 2D grid: bilinear donor weights
// followed by the conservation correction. Serves as the classical evolve
// for phase-space transport, where no flux-form FD generalization exists.
inline Field sl_first_order_2d(const Field& u, const Field& xi, const Field& eta,
                               const Grid2D& grid) {
    UpstreamGraph g = repair_orphans(build_2d(xi, eta, grid));
    std::vector<double> c = classical_coefficients(g);
    apply_conservation_constraint(g, c);
    return apply_coefficients(g, c, u);
}

// Debug dump: one "src,dst" row per edge, in edge order.
inline void write_edges_csv(const UpstreamGraph& g, std::ostream& os) {
    os << "src,dst\n";
    for (int e = 0; e < g.num_edges(); ++e) os << g.edge_src[e] << ',' << g.edge_dst[e] << '\n';
}

// Undirected message-passing neighborhoods N(i) = N_in(i) u N_out(i)
// (optionally u {i}), segments sorted by aggregating node then neighbor.
struct AggregationGraph {
    std::vector<int> seg_offsets; // size |V|+1
    std::vector<int> src;         // neighbor j
    std::vector<int> dst;         // aggregating node i
};

inline AggregationGraph build_aggregation(const UpstreamGraph& g, bool include_self = true) {
    std::vector<std::vector<int>> nbr(g.num_nodes);
    for (int e = 0; e < g.num_edges(); ++e) {
        nbr[g.edge_dst[e]].push_back(g.edge_src[e]);
        nbr[g.edge_src[e]].push_back(g.edge_dst[e]);
    }
    AggregationGraph a;
    a.seg_offsets.assign(g.num_nodes + 1, 0);
    for (int i = 0; i < g.num_nodes; ++i) {
        auto& v = nbr[i];
        if (include_self) v.push_back(i);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        a.seg_offsets[i + 1] = a.seg_offsets[i] + static_cast<int>(v.size());
    }
    a.src.reserve(a.seg_offsets.back());
    a.dst.reserve(a.seg_offsets.back());
    for (int i = 0; i < g.num_nodes; ++i)
        for (int j : nbr[i]) {
            a.src.push_back(j);
            a.dst.push_back(i);
        }
    return a;
}

} // namespace slgraph
