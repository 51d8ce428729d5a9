#include <catch2/catch_amalgamated.hpp>

#include "slgraph/grid.hpp"
#include "slgraph/rng.hpp"

using namespace slgraph;

TEST_CASE("coordinate of cell-left-aligned points") {
    Grid1D g(32, 0.0, 1.0);
    CHECK(g.coordinate(0) == 0.0);
    CHECK(g.coordinate(16) == 0.5);
    Grid1D g2(256, 0.0, 2.0 * kPi);
    CHECK(g2.coordinate(128) == Catch::Approx(kPi).margin(1e-15));
    CHECK_THROWS_AS(g.coordinate(-1), std::invalid_argument);
    CHECK_THROWS_AS(g.coordinate(32), std::invalid_argument);
}

TEST_CASE("wrap maps any integer into [0, n)") {
    Grid1D g(32, 0.0, 1.0);
    CHECK(g.wrap(-1) == 31);
    CHECK(g.wrap(32) == 0);
    CHECK(g.wrap(-65) == 31);
    for (int i = 0; i < 32; ++i) {
        CHECK(g.wrap(i) == i);              // idempotent on [0, n)
        CHECK(g.wrap(i + 32) == g.wrap(i)); // periodic
        CHECK(g.wrap(i - 96) == g.wrap(i));
    }
}

TEST_CASE("coordinates of wrapped indices differ by whole periods") {
    Grid1D g(8, -1.0, 3.0);
    for (int i = -20; i < 20; ++i) {
        const double ext = g.x_min + i * g.h; // periodic extension
        const double diff = ext - g.coordinate(g.wrap(i));
        const double periods = diff / g.length();
        CHECK(std::fabs(periods - std::round(periods)) < 1e-12);
    }
}

TEST_CASE("coarsen subsamples point values") {
    Grid1D fine(256, 0.0, 1.0);
    Rng rng(7);
    Field f(256);
    for (auto& v : f.values) v = rng.uniform(-1.0, 1.0);
    Field c = coarsen(f, fine, 8);
    REQUIRE(c.size() == 32);
    CHECK(c[4] == f[32]);

    CHECK(coarsen(f, fine, 1).values == f.values);

    Grid1D g16(16, 0.0, 1.0);
    Field ramp(16);
    for (int i = 0; i < 16; ++i) ramp[i] = i;
    Field r = coarsen(ramp, g16, 4);
    CHECK(r.values == std::vector<double>{0.0, 4.0, 8.0, 12.0});

    CHECK_THROWS_AS(coarsen(ramp, g16, 3), std::invalid_argument);
}

TEST_CASE("coarsen composes exactly for divisible factors") {
    Grid1D fine(64, 0.0, 1.0);
    Rng rng(11);
    Field f(64);
    for (auto& v : f.values) v = rng.uniform(0.0, 1.0);
    Field ab = coarsen(coarsen(f, fine, 2), coarse_grid(fine, 2), 4);
    Field once = coarsen(f, fine, 8);
    CHECK(ab.values == once.values);
}

TEST_CASE("2D coarsen subsamples per axis") {
    Grid2D g(8, 8, 0.0, 1.0, 0.0, 1.0);
    Field f(64);
    for (int j = 0; j < 8; ++j)
        for (int i = 0; i < 8; ++i) f[g.node(i, j)] = 10.0 * j + i;
    Field c = coarsen(f, g, 2);
    Grid2D gc = coarse_grid(g, 2);
    REQUIRE(c.size() == 16);
    CHECK(c[gc.node(1, 1)] == f[g.node(2, 2)]);
    CHECK(c[gc.node(3, 2)] == f[g.node(6, 4)]);
}

TEST_CASE("grid invariants are enforced") {
    CHECK_THROWS_AS(Grid1D(3, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Grid1D(8, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Grid2D(2, 8, 0.0, 1.0, 0.0, 1.0), std::invalid_argument);
}
