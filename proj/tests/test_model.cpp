#include <catch2/catch_amalgamated.hpp>

#include "slgraph/model.hpp"

using namespace slgraph;

namespace {

ModelConfig tiny_config_1d() {
    ModelConfig c;
    c.dim = 1;
    c.encoder_layers = 2;
    c.filters = 6;
    c.kernel = 3;
    c.gat_layers = 2;
    c.heads = 2;
    c.features = 6;
    c.decoder_hidden = 8;
    return c;
}

Field random_field(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Field f(n);
    for (auto& v : f.values) v = rng.uniform(lo, hi);
    return f;
}

} // namespace

TEST_CASE("zero encoder weights give zero embeddings") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 3);
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        for (double& v : p.at("enc.conv" + std::to_string(l) + ".w").data) v = 0.0;
        for (double& v : p.at("enc.conv" + std::to_string(l) + ".b").data) v = 0.0;
    }
    Rng rng(5);
    Grid1D g(16, 0.0, 1.0);
    Tape t;
    BoundParams bp = bind_params(t, p);
    const int u = leaf(t, Tensor::from_field(random_field(16, rng)));
    const int xi = leaf(t, Tensor::from_field(random_field(16, rng)));
    const int h0 = encode_1d(t, bp, u, xi);
    CHECK(t.value(h0).shape == std::vector<int>{16, cfg.filters});
    for (double v : t.value(h0).data) CHECK(v == 0.0);
}

TEST_CASE("encoder is exactly translation equivariant on the periodic grid") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 7);
    Rng rng(6);
    const int n = 12;
    Field u = random_field(n, rng), xi = random_field(n, rng, -5.0, 5.0);
    const int k = 5;
    Field us(n), xis(n);
    for (int i = 0; i < n; ++i) {
        us[(i + k) % n] = u[i];
        xis[(i + k) % n] = xi[i];
    }
    Tape t;
    BoundParams bp = bind_params(t, p);
    const int h = encode_1d(t, bp, leaf(t, Tensor::from_field(u)), leaf(t, Tensor::from_field(xi)));
    const int hs =
        encode_1d(t, bp, leaf(t, Tensor::from_field(us)), leaf(t, Tensor::from_field(xis)));
    const int F = cfg.filters;
    for (int i = 0; i < n; ++i)
        for (int f = 0; f < F; ++f)
            CHECK(t.value(hs)[static_cast<std::size_t>((i + k) % n) * F + f] ==
                  t.value(h)[static_cast<std::size_t>(i) * F + f]);
}

TEST_CASE("encoder output shape holds for any grid length") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 11);
    for (int n : {8, 19, 32}) {
        Rng rng(n);
        Tape t;
        BoundParams bp = bind_params(t, p);
        const int h = encode_1d(t, bp, leaf(t, Tensor::from_field(random_field(n, rng))),
                                leaf(t, Tensor::from_field(random_field(n, rng))));
        CHECK(t.value(h).shape == std::vector<int>{n, cfg.filters});
    }
}

TEST_CASE("self-loop-only graph cannot mix information across nodes") {
    ModelConfig cfg = tiny_config_1d();
    cfg.self_loops = false; // the graph below already carries its self edges
    ModelParams p = make_model_params(cfg, 13);
    UpstreamGraph gr;
    gr.num_nodes = 6;
    gr.stencil_size = 1;
    gr.nx = 6;
    for (int i = 0; i < 6; ++i) {
        gr.edge_src.push_back(i);
        gr.edge_dst.push_back(i);
    }
    detail::build_out_lists(gr);

    Rng rng(8);
    Tensor h0({6, cfg.filters});
    for (double& v : h0.data) v = rng.uniform(-1.0, 1.0);
    Tensor h0b = h0;
    for (int f = 0; f < cfg.filters; ++f) h0b.data[static_cast<std::size_t>(2) * cfg.filters + f] += 0.5;

    Tape t;
    BoundParams bp = bind_params(t, p);
    const int a = process(t, bp, gr, leaf(t, h0));
    const int b = process(t, bp, gr, leaf(t, h0b));
    for (int i = 0; i < 6; ++i) {
        bool same = true;
        for (int f = 0; f < cfg.features; ++f)
            same = same && t.value(a)[static_cast<std::size_t>(i) * cfg.features + f] ==
                               t.value(b)[static_cast<std::size_t>(i) * cfg.features + f];
        CHECK(same == (i != 2)); // only the perturbed node changes
    }
}

TEST_CASE("processor is permutation equivariant") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 17);
    Grid1D g(10, 0.0, 1.0);
    Rng rng(9);
    Field xi = random_field(10, rng, -4.0, 4.0);
    UpstreamGraph gr = repair_orphans(build_1d(xi, g));

    Tensor h0({10, cfg.filters});
    for (double& v : h0.data) v = rng.uniform(-1.0, 1.0);

    // permutation pi: relabel nodes, remap edges, permute h0 rows
    std::vector<int> pi(10);
    for (int i = 0; i < 10; ++i) pi[i] = (3 * i + 1) % 10;
    UpstreamGraph gp = gr;
    for (int e = 0; e < gr.num_edges(); ++e) {
        gp.edge_src[e] = pi[gr.edge_src[e]];
        gp.edge_dst[e] = pi[gr.edge_dst[e]];
    }
    detail::build_out_lists(gp);
    Tensor h0p({10, cfg.filters});
    for (int i = 0; i < 10; ++i)
        for (int f = 0; f < cfg.filters; ++f)
            h0p.data[static_cast<std::size_t>(pi[i]) * cfg.filters + f] =
                h0.data[static_cast<std::size_t>(i) * cfg.filters + f];

    Tape t;
    BoundParams bp = bind_params(t, p);
    const int a = process(t, bp, gr, leaf(t, h0));
    const int b = process(t, bp, gp, leaf(t, h0p));
    for (int i = 0; i < 10; ++i)
        for (int f = 0; f < cfg.features; ++f)
            CHECK(t.value(b)[static_cast<std::size_t>(pi[i]) * cfg.features + f] ==
                  Catch::Approx(t.value(a)[static_cast<std::size_t>(i) * cfg.features + f])
                      .margin(1e-12));
}

TEST_CASE("zero decoder network distributes donor mass uniformly") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 19);
    for (const char* name : {"dec.fc0.w", "dec.fc0.b", "dec.fc1.w", "dec.fc1.b"})
        for (double& v : p.at(name).data) v = 0.0;
    Grid1D g(12, 0.0, 1.0);
    Rng rng(10);
    Field xi = random_field(12, rng, -6.0, 6.0);
    Field u = random_field(12, rng);

    Tape t;
    BoundParams bp = bind_params(t, p);
    const ModelStep s = model_step_1d(t, bp, leaf(t, Tensor::from_field(u)), xi, g);
    const Tensor& d = t.value(s.coeffs);
    for (int j = 0; j < s.graph.num_nodes; ++j) {
        const int lo = s.graph.out_offsets[j], hi = s.graph.out_offsets[j + 1];
        for (int k = lo; k < hi; ++k)
            CHECK(d[s.graph.out_edges[k]] == Catch::Approx(1.0 / (hi - lo)).margin(1e-14));
    }
}

TEST_CASE("conservation correction examples") {
    Tape t;
    Tensor d({2});
    d.data = {0.2, 0.2};
    const int out = group_sum_to_one(t, leaf(t, d), {0, 2}, {0, 1});
    CHECK(t.value(out)[0] == Catch::Approx(0.5).margin(1e-15));
    CHECK(t.value(out)[1] == Catch::Approx(0.5).margin(1e-15));

    Tensor z({3}, 0.0);
    const int out2 = group_sum_to_one(t, leaf(t, z), {0, 3}, {0, 1, 2});
    for (int i = 0; i < 3; ++i)
        CHECK(t.value(out2)[i] == Catch::Approx(1.0 / 3.0).margin(1e-15));

    // idempotence
    Tensor r({4});
    r.data = {0.3, -0.9, 1.4, 0.05};
    const int once = group_sum_to_one(t, leaf(t, r), {0, 2, 4}, {0, 1, 2, 3});
    const int twice = group_sum_to_one(t, once, {0, 2, 4}, {0, 1, 2, 3});
    for (int i = 0; i < 4; ++i)
        CHECK(std::fabs(t.value(twice)[i] - t.value(once)[i]) <= 1e-15);
}

TEST_CASE("model step conserves mass for arbitrary parameters") {
    ModelConfig cfg = tiny_config_1d();
    Grid1D g(32, 0.0, 1.0);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        ModelParams p = make_model_params(cfg, seed);
        Rng rng(40 + seed);
        Field u = random_field(32, rng, 0.0, 1.0);
        Field xi(32, -10.2);
        for (auto& v : xi.values) v += rng.uniform(-0.3, 0.3);
        Field out = model_apply_1d(p, u, xi, g);
        CHECK(std::fabs(out.sum() - u.sum()) / std::fabs(u.sum()) < 1e-12);
    }
}

TEST_CASE("identity coefficients leave the solution unchanged") {
    Grid1D g(16, 0.0, 1.0);
    Field xi(16, 0.0);
    UpstreamGraph gr = repair_orphans(build_1d(xi, g));
    std::vector<double> c(gr.num_edges(), 0.0);
    for (int i = 0; i < 16; ++i) c[2 * i + 1] = 1.0; // self edge under zero shift
    Rng rng(50);
    Field u = random_field(16, rng);
    Field out = apply_coefficients(gr, c, u);
    CHECK(out.values == u.values);
}

TEST_CASE("decode is deterministic") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 23);
    Grid1D g(20, 0.0, 1.0);
    Rng rng(12);
    Field u = random_field(20, rng), xi = random_field(20, rng, -8.0, 8.0);
    Field a = model_apply_1d(p, u, xi, g);
    Field b = model_apply_1d(p, u, xi, g);
    CHECK(a.values == b.values);
}

TEST_CASE("full model step is rotation equivariant on the periodic grid") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 29);
    Grid1D g(14, 0.0, 1.0);
    Rng rng(13);
    Field u = random_field(14, rng), xi = random_field(14, rng, -3.0, 3.0);
    const int k = 6;
    Field us(14), xis(14);
    for (int i = 0; i < 14; ++i) {
        us[(i + k) % 14] = u[i];
        xis[(i + k) % 14] = xi[i];
    }
    Field a = model_apply_1d(p, u, xi, g);
    Field b = model_apply_1d(p, us, xis, g);
    for (int i = 0; i < 14; ++i)
        CHECK(b[(i + k) % 14] == Catch::Approx(a[i]).margin(1e-12));
}

TEST_CASE("2D model step: shapes, conservation, both axis conventions") {
    for (bool y_per : {true, false}) {
        ModelConfig cfg = tiny_config_1d();
        cfg.dim = 2;
        cfg.y_periodic = y_per;
        ModelParams p = make_model_params(cfg, 31);
        Grid2D g(8, 8, 0.0, 1.0, -1.0, 1.0, y_per);
        Rng rng(14);
        Field u = random_field(g.size(), rng, 0.0, 1.0);
        Field xi = random_field(g.size(), rng, -6.0, 6.0);
        Field eta = random_field(g.size(), rng, -2.0, 2.0);
        Field out = model_apply_2d(p, u, xi, eta, g);
        REQUIRE(out.size() == u.size());
        CHECK(std::fabs(out.sum() - u.sum()) / std::fabs(u.sum()) < 1e-12);
    }
}

TEST_CASE("upstream coordinate feature flag changes shapes consistently") {
    ModelConfig cfg = tiny_config_1d();
    cfg.upstream_coord_feature = true;
    ModelParams p = make_model_params(cfg, 37);
    CHECK(p.at("gat0.phi.w").shape == std::vector<int>{2 * (cfg.filters + 1), cfg.features});
    Grid1D g(12, 0.0, 1.0);
    Rng rng(15);
    Field u = random_field(12, rng), xi = random_field(12, rng, -4.0, 4.0);
    Field out = model_apply_1d(p, u, xi, g);
    CHECK(std::fabs(out.sum() - u.sum()) / std::fabs(u.sum()) < 1e-12);
}

TEST_CASE("full model gradient matches finite differences on a small problem") {
    ModelConfig cfg = tiny_config_1d();
    ModelParams p = make_model_params(cfg, 41);
    Grid1D g(8, 0.0, 1.0);
    Rng rng(16);
    Field u = random_field(8, rng, 0.0, 1.0);
    Field xi = random_field(8, rng, -2.0, 2.0);
    Field target = random_field(8, rng, 0.0, 1.0);

    auto loss_value = [&](const ModelParams& params) {
        Tape t;
        BoundParams bp = bind_params(t, params);
        const ModelStep s = model_step_1d(t, bp, leaf(t, Tensor::from_field(u)), xi, g);
        const int l = mse(t, s.u_next, leaf(t, Tensor::from_field(target)));
        return t.value(l)[0];
    };

    Tape t;
    BoundParams bp = bind_params(t, p);
    const ModelStep s = model_step_1d(t, bp, leaf(t, Tensor::from_field(u)), xi, g);
    const int l = mse(t, s.u_next, leaf(t, Tensor::from_field(target)));
    t.backward(l);

    double gmax = 0.0;
    for (std::size_t k = 0; k < p.tensors.size(); ++k)
        for (double v : t.grad(bp.ids[k]).data) gmax = std::max(gmax, std::fabs(v));
    REQUIRE(gmax > 0.0);

    const double eps = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        // probe a deterministic subset of each tensor to keep runtime modest
        const std::size_t stride = std::max<std::size_t>(1, p.tensors[k].numel() / 40);
        for (std::size_t i = 0; i < p.tensors[k].numel(); i += stride) {
            ModelParams q = p;
            q.tensors[k][i] += eps;
            const double fp = loss_value(q);
            q.tensors[k][i] -= 2.0 * eps;
            const double fm = loss_value(q);
            const double fd = (fp - fm) / (2.0 * eps);
            const double ad = t.grad(bp.ids[k])[i];
            worst = std::max(worst,
                             std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1e-3 * gmax}));
        }
    }
    CHECK(worst < 1e-5);
}
