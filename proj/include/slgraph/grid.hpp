// Uniform periodic grid descriptors and point-value fields.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slgraph {

inline constexpr double kPi = 3.14159265358979323846;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Uniform 1D grid on [x_min, x_max), periodic. Points are cell-left-aligned:
// x_i = x_min + i*h for i in [0, n); there is no point at x_max, so the
// periodic wrap is exact.
struct Grid1D {
    int n = 0;
    double x_min = 0.0;
    double x_max = 1.0;
    double h = 0.0;

    Grid1D() = default;
    Grid1D(int n_, double x_min_, double x_max_)
        : n(n_), x_min(x_min_), x_max(x_max_), h((x_max_ - x_min_) / n_) {
        require(n >= 4, "Grid1D: n must be >= 4");
        require(h > 0.0, "Grid1D: x_max must exceed x_min");
    }

    double length() const { return x_max - x_min; }

    double coordinate(int i) const {
        require(i >= 0 && i < n, "Grid1D::coordinate: index out of range");
        return x_min + i * h;
    }

    // i mod n, mapped into [0, n) for any integer i.
    int wrap(int i) const {
        int r = i % n;
        return r < 0 ? r + n : r;
    }

    bool operator==(const Grid1D& o) const {
        return n == o.n && x_min == o.x_min && x_max == o.x_max;
    }
};

// Tensor product of two 1D descriptors. The x axis is always periodic; the
// y axis is periodic for linear 2D transport and non-periodic (truncated
// velocity domain) for Vlasov-Poisson.
struct Grid2D {
    int nx = 0, ny = 0;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    double hx = 0.0, hy = 0.0;
    bool y_periodic = true;

    Grid2D() = default;
    Grid2D(int nx_, int ny_, double x_min_, double x_max_, double y_min_, double y_max_,
           bool y_periodic_ = true)
        : nx(nx_), ny(ny_), x_min(x_min_), x_max(x_max_), y_min(y_min_), y_max(y_max_),
          hx((x_max_ - x_min_) / nx_), hy((y_max_ - y_min_) / ny_), y_periodic(y_periodic_) {
        require(nx >= 4 && ny >= 4, "Grid2D: nx, ny must be >= 4");
        require(hx > 0.0 && hy > 0.0, "Grid2D: bounds must be increasing");
    }

    int size() const { return nx * ny; }

    std::pair<double, double> coordinate(int i, int j) const {
        require(i >= 0 && i < nx && j >= 0 && j < ny, "Grid2D::coordinate: index out of range");
        return {x_min + i * hx, y_min + j * hy};
    }

    int wrap_x(int i) const {
        int r = i % nx;
        return r < 0 ? r + nx : r;
    }
    int wrap_y(int j) const {
        int r = j % ny;
        return r < 0 ? r + ny : r;
    }

    // Flat node id; x fastest (row-major over (j, i)).
    int node(int i, int j) const { return j * nx + i; }

    Grid1D x_grid() const { return Grid1D(nx, x_min, x_max); }

    bool operator==(const Grid2D& o) const {
        return nx == o.nx && ny == o.ny && x_min == o.x_min && x_max == o.x_max &&
               y_min == o.y_min && y_max == o.y_max && y_periodic == o.y_periodic;
    }
};

// Flat float64 point values bound to a grid. Length n (1D) or nx*ny (2D,
// x fastest). Used for solutions U, shifts xi/eta, fields E, phase-space f.
struct Field {
    std::vector<double> values;

    Field() = default;
    explicit Field(std::size_t count, double fill = 0.0) : values(count, fill) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Point-value subsampling onto a grid coarsened by an integer factor.
// Output value j equals input value j*factor; point values are sampled,
// not averaged.
inline Field coarsen(const Field& f, const Grid1D& grid, int factor) {
    require(factor >= 1, "coarsen: factor must be positive");
    require(grid.n % factor == 0, "coarsen: factor must divide n");
    require(static_cast<int>(f.size()) == grid.n, "coarsen: field/grid size mismatch");
    const int nc = grid.n / factor;
    Field out(nc);
    for (int j = 0; j < nc; ++j) out[j] = f[static_cast<std::size_t>(j) * factor];
    return out;
}

inline Field coarsen(const Field& f, const Grid2D& grid, int factor) {
    require(factor >= 1, "coarsen: factor must be positive");
    require(grid.nx % factor == 0 && grid.ny % factor == 0, "coarsen: factor must divide nx and ny");
    require(static_cast<int>(f.size()) == grid.size(), "coarsen: field/grid size mismatch");
    const int ncx = grid.nx / factor, ncy = grid.ny / factor;
    Field out(static_cast<std::size_t>(ncx) * ncy);
    for (int j = 0; j < ncy; ++j)
        for (int i = 0; i < ncx; ++i)
            out[static_cast<std::size_t>(j) * ncx + i] = f[static_cast<std::size_t>(j) * factor * grid.nx + static_cast<std::size_t>(i) * factor];
    return out;
}

inline Grid1D coarse_grid(const Grid1D& g, int factor) {
    require(g.n % factor == 0, "coarse_grid: factor must divide n");
    return Grid1D(g.n / factor, g.x_min, g.x_max);
}

inline Grid2D coarse_grid(const Grid2D& g, int factor) {
    require(g.nx % factor == 0 && g.ny % factor == 0, "coarse_grid: factor must divide nx, ny");
    return Grid2D(g.nx / factor, g.ny / factor, g.x_min, g.x_max, g.y_min, g.y_max, g.y_periodic);
}

} // namespace slgraph
