#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "slgraph/graph.hpp"
#include "slgraph/nnad.hpp"
#include "slgraph/rng.hpp"

using namespace slgraph;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Central-difference check of d(loss)/d(inputs) for a scalar-valued tape
// program. Weighs the program output with fixed random coefficients so
// index or transposition mistakes cannot cancel.
double max_rel_grad_error(const std::vector<Tensor>& inputs,
                          const std::function<int(Tape&, const std::vector<int>&)>& program,
                          double eps = 1e-6) {
    auto eval = [&](const std::vector<Tensor>& xs) {
        Tape t;
        std::vector<int> ids;
        for (const Tensor& x : xs) ids.push_back(leaf(t, x));
        const int loss = program(t, ids);
        return t.value(loss)[0];
    };
    Tape t;
    std::vector<int> ids;
    for (const Tensor& x : inputs) ids.push_back(leaf(t, x));
    const int loss = program(t, ids);
    t.backward(loss);

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
            std::vector<Tensor> xs = inputs;
            xs[k][i] += eps;
            const double fp = eval(xs);
            xs[k][i] -= 2.0 * eps;
            const double fm = eval(xs);
            const double fd = (fp - fm) / (2.0 * eps);
            const double ad = t.grad(ids[k])[i];
            const double rel = std::fabs(ad - fd) / std::max({1.0, std::fabs(ad), std::fabs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

int weighted_sum(Tape& t, int y, Rng& rng) {
    Tensor w(t.value(y).shape);
    for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
    return sum_all(t, mul(t, y, leaf(t, std::move(w))));
}

} // namespace

TEST_CASE("conv1d with a centered delta kernel is the identity") {
    Rng rng(1);
    Tensor x = random_tensor({3, 16}, rng);
    Tensor w({3, 3, 5}, 0.0);
    for (int c = 0; c < 3; ++c) w.data[(static_cast<std::size_t>(c) * 3 + c) * 5 + 2] = 1.0;
    Tensor b({3}, 0.0);
    Tape t;
    const int out = conv1d_circular(t, leaf(t, x), leaf(t, w), leaf(t, b));
    CHECK(t.value(out).data == x.data);
}

TEST_CASE("conv1d on constant input sums the kernel") {
    Rng rng(2);
    Tensor x({2, 12}, 3.0);
    Tensor w = random_tensor({4, 2, 5}, rng);
    Tensor b({4}, 0.0);
    Tape t;
    const int out = conv1d_circular(t, leaf(t, x), leaf(t, w), leaf(t, b));
    for (int co = 0; co < 4; ++co) {
        double wsum = 0.0;
        for (int ci = 0; ci < 2; ++ci)
            for (int k = 0; k < 5; ++k)
                wsum += w.data[(static_cast<std::size_t>(co) * 2 + ci) * 5 + k];
        for (int p = 0; p < 12; ++p)
            CHECK(t.value(out)[static_cast<std::size_t>(co) * 12 + p] ==
                  Catch::Approx(3.0 * wsum).margin(1e-13));
    }
}

TEST_CASE("conv1d matches a naive triple-loop oracle") {
    Rng rng(3);
    Tensor x = random_tensor({3, 11}, rng);
    Tensor w = random_tensor({2, 3, 5}, rng);
    Tensor b = random_tensor({2}, rng);
    Tape t;
    const int out = conv1d_circular(t, leaf(t, x), leaf(t, w), leaf(t, b));
    for (int co = 0; co < 2; ++co)
        for (int p = 0; p < 11; ++p) {
            double acc = b[co];
            for (int ci = 0; ci < 3; ++ci)
                for (int k = 0; k < 5; ++k) {
                    const int q = detail::wrap_index(p + k - 2, 11);
                    acc += w.data[(static_cast<std::size_t>(co) * 3 + ci) * 5 + k] *
                           x.data[static_cast<std::size_t>(ci) * 11 + q];
                }
            CHECK(t.value(out)[static_cast<std::size_t>(co) * 11 + p] ==
                  Catch::Approx(acc).margin(1e-13));
        }
}

TEST_CASE("conv2d matches a naive oracle with both paddings") {
    Rng rng(4);
    for (bool y_per : {true, false}) {
        Tensor x = random_tensor({2, 6, 7}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        Tape t;
        const int out = conv2d_circular(t, leaf(t, x), leaf(t, w), leaf(t, b), y_per);
        for (int co = 0; co < 3; ++co)
            for (int y = 0; y < 6; ++y)
                for (int xx = 0; xx < 7; ++xx) {
                    double acc = b[co];
                    for (int ci = 0; ci < 2; ++ci)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                int yy = y + ky - 1;
                                if (y_per)
                                    yy = detail::wrap_index(yy, 6);
                                else if (yy < 0 || yy >= 6)
                                    continue;
                                const int qx = detail::wrap_index(xx + kx - 1, 7);
                                acc += w.data[((static_cast<std::size_t>(co) * 2 + ci) * 3 + ky) * 3 +
                                              kx] *
                                       x.data[(static_cast<std::size_t>(ci) * 6 + yy) * 7 + qx];
                            }
                    CHECK(t.value(out)[(static_cast<std::size_t>(co) * 6 + y) * 7 + xx] ==
                          Catch::Approx(acc).margin(1e-13));
                }
    }
}

TEST_CASE("activation and linear values") {
    Tape t;
    Tensor x({3});
    x.data = {0.0, -20.0, 2.5};
    const int y = elu(t, leaf(t, x));
    CHECK(t.value(y)[0] == 0.0);
    CHECK(t.value(y)[1] == Catch::Approx(std::expm1(-20.0)).epsilon(1e-15));
    CHECK(t.value(y)[2] == 2.5);

    Rng rng(5);
    Tensor v = random_tensor({4, 3}, rng);
    Tensor eye({3, 3}, 0.0);
    for (int i = 0; i < 3; ++i) eye.data[static_cast<std::size_t>(i) * 3 + i] = 1.0;
    Tensor zero({3}, 0.0);
    const int out = linear(t, leaf(t, v), leaf(t, eye), leaf(t, zero));
    CHECK(t.value(out).data == v.data);
}

TEST_CASE("segment softmax values and oracle") {
    Tape t;
    Tensor s({3, 1});
    s.data = {0.7, 1.3, 1.3};
    const int out = segment_softmax(t, leaf(t, s), {0, 1, 3});
    CHECK(t.value(out)[0] == 1.0); // singleton segment
    CHECK(t.value(out)[1] == Catch::Approx(0.5));
    CHECK(t.value(out)[2] == Catch::Approx(0.5));

    Rng rng(6);
    Tensor sc = random_tensor({10, 2}, rng, -3.0, 3.0);
    std::vector<int> offs{0, 3, 4, 8, 10};
    Tape t2;
    const int o2 = segment_softmax(t2, leaf(t2, sc), offs);
    for (std::size_t seg = 0; seg + 1 < offs.size(); ++seg)
        for (int h = 0; h < 2; ++h) {
            double z = 0.0;
            for (int e = offs[seg]; e < offs[seg + 1]; ++e)
                z += std::exp(sc.data[static_cast<std::size_t>(e) * 2 + h]);
            double total = 0.0;
            for (int e = offs[seg]; e < offs[seg + 1]; ++e) {
                const double direct = std::exp(sc.data[static_cast<std::size_t>(e) * 2 + h]) / z;
                CHECK(t2.value(o2)[static_cast<std::size_t>(e) * 2 + h] ==
                      Catch::Approx(direct).margin(1e-14));
                total += t2.value(o2)[static_cast<std::size_t>(e) * 2 + h];
            }
            CHECK(total == Catch::Approx(1.0).margin(1e-14));
        }
}

TEST_CASE("gather and scatter basics") {
    Rng rng(7);
    Tensor x = random_tensor({5, 3}, rng);
    Tape t;
    // one edge per node in permuted order: scatter is a permuted copy
    std::vector<int> perm{3, 0, 4, 1, 2};
    const int g = gather_rows(t, leaf(t, x), perm);
    const int back = scatter_sum_rows(t, g, perm, 5);
    CHECK(t.value(back).data == x.data);

    // scatter then gather of uniform values scales by in-degree
    Tensor ones({6, 1}, 1.0);
    std::vector<int> dst{0, 0, 0, 1, 2, 2};
    Tape t2;
    const int s = scatter_sum_rows(t2, leaf(t2, ones), dst, 3);
    CHECK(t2.value(s).data == std::vector<double>{3.0, 1.0, 2.0});
    const int g2 = gather_rows(t2, s, dst);
    CHECK(t2.value(g2).data == std::vector<double>{3.0, 3.0, 3.0, 1.0, 2.0, 2.0});

    CHECK_THROWS_AS(gather_rows(t2, s, {5}), std::invalid_argument);
}

TEST_CASE("quadratic loss gradient is exact") {
    Rng rng(8);
    Tensor x = random_tensor({7}, rng);
    Tape t;
    const int xid = leaf(t, x);
    const int loss = sum_all(t, mul(t, xid, xid));
    t.backward(loss);
    for (int i = 0; i < 7; ++i) CHECK(t.grad(xid)[i] == 2.0 * x[i]);
}

TEST_CASE("backward guards") {
    Tape t;
    Tensor x({2}, 1.0);
    const int xid = leaf(t, x);
    const int y = mul(t, xid, xid);
    CHECK_THROWS_AS(t.backward(y), std::invalid_argument); // non-scalar loss
    const int loss = sum_all(t, y);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), std::logic_error); // backward twice
    t.reset();
}

TEST_CASE("every primitive passes a finite-difference gradient check") {
    Rng rng(9);

    SECTION("elementwise and reductions") {
        std::vector<Tensor> in{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(101);
                  const int a = add(t, ids[0], ids[1]);
                  const int s = sub(t, a, ids[1]);
                  const int m = mul(t, s, ids[0]);
                  const int sc = scale(t, m, 0.7);
                  return weighted_sum(t, sc, wr);
              }) < 5e-7);
    }

    SECTION("activations") {
        std::vector<Tensor> in{random_tensor({2, 9}, rng, -2.0, 2.0)};
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(102);
                  return weighted_sum(t, elu(t, ids[0]), wr);
              }) < 5e-6);
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(103);
                  return weighted_sum(t, leaky_relu(t, ids[0], 0.2), wr);
              }) < 5e-6);
    }

    SECTION("linear, concat, transpose, reshape, stack") {
        std::vector<Tensor> in{random_tensor({4, 3}, rng), random_tensor({3, 5}, rng),
                               random_tensor({5}, rng), random_tensor({4, 2}, rng)};
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(104);
                  const int y = linear(t, ids[0], ids[1], ids[2]);
                  const int c = concat_cols(t, y, ids[3]);
                  const int tr = transpose2(t, c);
                  const int rs = reshape(t, tr, {4, 7});
                  return weighted_sum(t, rs, wr);
              }) < 5e-7);
        std::vector<Tensor> vecs{random_tensor({6}, rng), random_tensor({6}, rng),
                                 random_tensor({6}, rng)};
        CHECK(max_rel_grad_error(vecs, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(105);
                  return weighted_sum(t, stack_rows(t, ids), wr);
              }) < 5e-7);
    }

    SECTION("convolutions") {
        std::vector<Tensor> in{random_tensor({2, 8}, rng), random_tensor({3, 2, 5}, rng),
                               random_tensor({3}, rng)};
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(106);
                  return weighted_sum(t, conv1d_circular(t, ids[0], ids[1], ids[2]), wr);
              }) < 5e-6);
        std::vector<Tensor> in2{random_tensor({2, 5, 6}, rng), random_tensor({2, 2, 3, 3}, rng),
                                random_tensor({2}, rng)};
        for (bool per : {true, false})
            CHECK(max_rel_grad_error(in2, [per](Tape& t, const std::vector<int>& ids) {
                      Rng wr(107);
                      return weighted_sum(t, conv2d_circular(t, ids[0], ids[1], ids[2], per), wr);
                  }) < 5e-6);
    }

    SECTION("graph movement and attention pieces") {
        std::vector<int> idx{0, 2, 2, 4, 1, 3, 0};
        std::vector<Tensor> in{random_tensor({5, 3}, rng)};
        CHECK(max_rel_grad_error(in, [&idx](Tape& t, const std::vector<int>& ids) {
                  Rng wr(108);
                  const int g = gather_rows(t, ids[0], idx);
                  const int s = scatter_sum_rows(t, g, idx, 5);
                  return weighted_sum(t, s, wr);
              }) < 5e-7);

        std::vector<Tensor> sc{random_tensor({9, 2}, rng, -2.0, 2.0)};
        std::vector<int> offs{0, 4, 6, 9};
        CHECK(max_rel_grad_error(sc, [&offs](Tape& t, const std::vector<int>& ids) {
                  Rng wr(109);
                  return weighted_sum(t, segment_softmax(t, ids[0], offs), wr);
              }) < 5e-6);

        std::vector<Tensor> hv{random_tensor({6, 8}, rng), random_tensor({8}, rng),
                               random_tensor({6, 2}, rng)};
        CHECK(max_rel_grad_error(hv, [](Tape& t, const std::vector<int>& ids) {
                  Rng wr(110);
                  const int mr = mul_rowvec(t, ids[0], ids[1]);
                  const int bs = block_sum(t, mr, 2);
                  const int hs = head_scale(t, ids[0], add(t, bs, ids[2]));
                  return weighted_sum(t, hs, wr);
              }) < 5e-6);
    }

    SECTION("conservation correction") {
        Grid1D g(8, 0.0, 1.0);
        Field xi(8);
        Rng r2(33);
        for (auto& v : xi.values) v = r2.uniform(-4.0, 4.0);
        UpstreamGraph gr = repair_orphans(build_1d(xi, g));
        std::vector<Tensor> in{random_tensor({gr.num_edges()}, rng)};
        CHECK(max_rel_grad_error(in, [&gr](Tape& t, const std::vector<int>& ids) {
                  Rng wr(111);
                  const int d = group_sum_to_one(t, ids[0], gr.out_offsets, gr.out_edges);
                  return weighted_sum(t, d, wr);
              }) < 5e-7);
    }

    SECTION("mse") {
        std::vector<Tensor> in{random_tensor({5}, rng), random_tensor({5}, rng)};
        CHECK(max_rel_grad_error(in, [](Tape& t, const std::vector<int>& ids) {
                  return mse(t, ids[0], ids[1]);
              }) < 5e-7);
    }
}

TEST_CASE("forward and backward are deterministic") {
    Rng rng(10);
    Tensor x = random_tensor({3, 6}, rng);
    Tensor w = random_tensor({2, 3, 5}, rng);
    Tensor b = random_tensor({2}, rng);
    auto run = [&]() {
        Tape t;
        const int xid = leaf(t, x);
        const int y = conv1d_circular(t, xid, leaf(t, w), leaf(t, b));
        const int loss = sum_all(t, mul(t, y, y));
        t.backward(loss);
        return std::make_pair(t.value(y).data, t.grad(xid).data);
    };
    auto [v1, g1] = run();
    auto [v2, g2] = run();
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}

TEST_CASE("Adam leaves parameters unchanged under zero gradients") {
    Rng rng(11);
    std::vector<Tensor> params{random_tensor({4, 4}, rng), random_tensor({4}, rng)};
    std::vector<Tensor> before = params;
    std::vector<Tensor> grads{Tensor({4, 4}, 0.0), Tensor({4}, 0.0)};
    AdamState st;
    for (int k = 0; k < 5; ++k) adam_step(params, grads, st);
    for (std::size_t p = 0; p < params.size(); ++p) CHECK(params[p].data == before[p].data);
}

TEST_CASE("Adam descends a simple quadratic") {
    std::vector<Tensor> params{Tensor({3}, 2.0)};
    AdamState st;
    st.lr = 0.05;
    for (int k = 0; k < 400; ++k) {
        std::vector<Tensor> grads{params[0]};
        for (double& g : grads[0].data) g *= 2.0; // d/dx of x^2
        adam_step(params, grads, st);
    }
    for (double v : params[0].data) CHECK(std::fabs(v) < 1e-3);
}
