// Encode-process-decode coefficient network over the dynamical upstream
// graph, and the conservative one-step solution update built on it.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "slgraph/characteristics.hpp"
#include "slgraph/graph.hpp"
#include "slgraph/grid.hpp"
#include "slgraph/nnad.hpp"
#include "slgraph/rng.hpp"

namespace slgraph {

struct ModelConfig {
    int dim = 1;             // 1: (U, xi) channels; 2: (U, xi, eta)
    int encoder_layers = 6;  // 9 for the Vlasov-Poisson solver
    int filters = 32;
    int kernel = 5;
    int gat_layers = 2;
    int heads = 4;
    int features = 32;       // processor output feature dimension
    int decoder_hidden = 256;
    bool y_periodic = true;          // false on the truncated velocity axis
    bool self_loops = true;          // add {i} to the aggregation neighborhood
    bool attention_v2 = true;        // score-inside-nonlinearity GAT variant
    bool upstream_coord_feature = false; // optional inductive bias, off by default
    double leaky_slope = 0.2;

    int input_channels() const { return dim == 1 ? 2 : 3; }
    int coord_channels() const { return upstream_coord_feature ? dim : 0; }
    // Processor input width of round k.
    int round_in_features(int k) const {
        return k == 0 ? filters + coord_channels() : features;
    }
    void validate() const {
        require(dim == 1 || dim == 2, "ModelConfig: dim must be 1 or 2");
        require(encoder_layers >= 1 && filters >= 1 && kernel >= 1 && kernel % 2 == 1,
                "ModelConfig: bad encoder sizes");
        require(gat_layers >= 1 && heads >= 1 && features % heads == 0,
                "ModelConfig: features must divide into heads");
        require(decoder_hidden >= 1, "ModelConfig: bad decoder size");
    }
};

// Named-tensor registry holding all weights, in a fixed order that defines
// both the initialization draw sequence and the checkpoint layout.
struct ModelParams {
    ModelConfig config;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("ModelParams: unknown tensor " + name);
    }
    Tensor& at(const std::string& name) { return tensors[index_of(name)]; }
    const Tensor& at(const std::string& name) const { return tensors[index_of(name)]; }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const Tensor& t : tensors) n += t.numel();
        return n;
    }
};

namespace detail {

inline void add_param(ModelParams& p, const std::string& name, std::vector<int> shape) {
    p.names.push_back(name);
    p.tensors.emplace_back(std::move(shape), 0.0);
}

// fan-in scaled uniform init; biases stay zero.
inline void fill_fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
    const double s = std::sqrt(1.0 / fan_in);
    for (double& v : t.data) v = rng.uniform(-s, s);
}

} // namespace detail

inline ModelParams make_model_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    const int K = cfg.kernel;
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        const int cin = l == 0 ? cfg.input_channels() : cfg.filters;
        if (cfg.dim == 1)
            detail::add_param(p, "enc.conv" + std::to_string(l) + ".w", {cfg.filters, cin, K});
        else
            detail::add_param(p, "enc.conv" + std::to_string(l) + ".w", {cfg.filters, cin, K, K});
        detail::add_param(p, "enc.conv" + std::to_string(l) + ".b", {cfg.filters});
    }
    for (int l = 0; l < cfg.gat_layers; ++l) {
        const std::string pre = "gat" + std::to_string(l) + ".";
        const int fin = cfg.round_in_features(l);
        detail::add_param(p, pre + "phi.w", {2 * fin, cfg.features});
        detail::add_param(p, pre + "phi.b", {cfg.features});
        detail::add_param(p, pre + "att.w", {2 * fin, cfg.features});
        detail::add_param(p, pre + "att.b", {cfg.features});
        detail::add_param(p, pre + "att.a", {cfg.features});
        detail::add_param(p, pre + "upd.w", {fin + cfg.features, cfg.features});
        detail::add_param(p, pre + "upd.b", {cfg.features});
    }
    detail::add_param(p, "dec.fc0.w", {2 * cfg.features, cfg.decoder_hidden});
    detail::add_param(p, "dec.fc0.b", {cfg.decoder_hidden});
    detail::add_param(p, "dec.fc1.w", {cfg.decoder_hidden, 1});
    detail::add_param(p, "dec.fc1.b", {1});

    Rng rng(seed);
    for (std::size_t i = 0; i < p.names.size(); ++i) {
        Tensor& t = p.tensors[i];
        if (p.names[i].back() == 'b') continue; // biases zero
        int fan_in;
        if (t.rank() >= 3) { // conv kernel [Cout, Cin, K(,K)]
            fan_in = t.shape[1] * t.shape[2] * (t.rank() == 4 ? t.shape[3] : 1);
        } else if (t.rank() == 2) { // dense [F_in, F_out]
            fan_in = t.shape[0];
        } else { // attention vector
            fan_in = t.shape[0];
        }
        detail::fill_fan_in_uniform(t, fan_in, rng);
    }
    return p;
}

// Parameters leafed onto a tape; grads are read back through `ids`.
struct BoundParams {
    const ModelParams* params = nullptr;
    std::vector<int> ids;

    int id(const std::string& name) const { return ids[params->index_of(name)]; }
};

inline BoundParams bind_params(Tape& t, const ModelParams& p) {
    BoundParams b;
    b.params = &p;
    b.ids.reserve(p.tensors.size());
    for (const Tensor& w : p.tensors) b.ids.push_back(leaf(t, w));
    return b;
}

// ---------------------------------------------------------------------------
// Encoder: stacked circular convolutions with ELU between layers and a
// linear final layer; one feature vector per node.

inline int encode_1d(Tape& t, const BoundParams& bp, int u_id, int xi_id) {
    const ModelConfig& cfg = bp.params->config;
    int h = stack_rows(t, {u_id, xi_id}); // [2, N]
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        const std::string pre = "enc.conv" + std::to_string(l) + ".";
        h = conv1d_circular(t, h, bp.id(pre + "w"), bp.id(pre + "b"));
        if (l + 1 < cfg.encoder_layers) h = elu(t, h);
    }
    return transpose2(t, h); // [N, filters]
}

inline int encode_2d(Tape& t, const BoundParams& bp, int u_id, int xi_id, int eta_id, int nx,
                     int ny) {
    const ModelConfig& cfg = bp.params->config;
    int h = stack_rows(t, {u_id, xi_id, eta_id});   // [3, N]
    h = reshape(t, h, {3, ny, nx});
    for (int l = 0; l < cfg.encoder_layers; ++l) {
        const std::string pre = "enc.conv" + std::to_string(l) + ".";
        h = conv2d_circular(t, h, bp.id(pre + "w"), bp.id(pre + "b"), cfg.y_periodic);
        if (l + 1 < cfg.encoder_layers) h = elu(t, h);
    }
    h = reshape(t, h, {cfg.filters, ny * nx});
    return transpose2(t, h); // [N, filters]
}

// ---------------------------------------------------------------------------
// Processor: K rounds of GAT message passing over the undirected union
// neighborhoods of the upstream graph.

inline int process(Tape& t, const BoundParams& bp, const UpstreamGraph& graph, int h0) {
    const ModelConfig& cfg = bp.params->config;
    const AggregationGraph agg = build_aggregation(graph, cfg.self_loops);
    const int n = graph.num_nodes;
    int h = h0;
    for (int l = 0; l < cfg.gat_layers; ++l) {
        const std::string pre = "gat" + std::to_string(l) + ".";
        const int hi = gather_rows(t, h, agg.dst);
        const int hj = gather_rows(t, h, agg.src);
        const int cat = concat_cols(t, hi, hj); // [E_agg, 2*fin]
        const int msg = elu(t, linear(t, cat, bp.id(pre + "phi.w"), bp.id(pre + "phi.b")));
        const int att = linear(t, cat, bp.id(pre + "att.w"), bp.id(pre + "att.b"));
        int scores;
        if (cfg.attention_v2) {
            const int act = leaky_relu(t, att, cfg.leaky_slope);
            scores = block_sum(t, mul_rowvec(t, act, bp.id(pre + "att.a")), cfg.heads);
        } else {
            const int dot = block_sum(t, mul_rowvec(t, att, bp.id(pre + "att.a")), cfg.heads);
            scores = leaky_relu(t, dot, cfg.leaky_slope);
        }
        const int alpha = segment_softmax(t, scores, agg.seg_offsets);
        const int weighted = head_scale(t, msg, alpha);
        const int m = scatter_sum_rows(t, weighted, agg.dst, n);
        h = linear(t, concat_cols(t, h, m), bp.id(pre + "upd.w"), bp.id(pre + "upd.b"));
        if (l + 1 < cfg.gat_layers) h = elu(t, h); // final round stays linear
    }
    return h;
}

// ---------------------------------------------------------------------------
// Decoder: per-edge concatenation (donor embedding first), an MLP with one
// hidden layer, then the parameter-free conservation correction.

inline int decode(Tape& t, const BoundParams& bp, const UpstreamGraph& graph, int h_final) {
    require(graph.num_edges() > 0, "decode: empty edge list");
    const int hs = gather_rows(t, h_final, graph.edge_src);
    const int hd = gather_rows(t, h_final, graph.edge_dst);
    const int w = concat_cols(t, hs, hd); // [E, 2*features]
    int d = linear(t, w, bp.id("dec.fc0.w"), bp.id("dec.fc0.b"));
    d = elu(t, d);
    d = linear(t, d, bp.id("dec.fc1.w"), bp.id("dec.fc1.b")); // [E, 1]
    d = reshape(t, d, {graph.num_edges()});
    return group_sum_to_one(t, d, graph.out_offsets, graph.out_edges);
}

// Applies per-edge coefficients: u'_i = sum over incoming edges of c_e * u_src.
inline int apply_edge_coefficients(Tape& t, const UpstreamGraph& graph, int coeffs, int u_id) {
    const int gathered = gather_rows(t, u_id, graph.edge_src); // [E]
    const int prod = mul(t, coeffs, gathered);
    return scatter_sum_rows(t, prod, graph.edge_dst, graph.num_nodes);
}

// Optional inductive bias: append the upstream point's stencil-local
// coordinates to the node embeddings.
inline int append_coord_features(Tape& t, const UpstreamGraph& graph, int h) {
    Tensor fx({graph.num_nodes, 1});
    for (int i = 0; i < graph.num_nodes; ++i) fx[i] = graph.frac_x[i];
    int out = concat_cols(t, h, leaf(t, std::move(fx)));
    if (graph.stencil_size == 4) {
        Tensor fy({graph.num_nodes, 1});
        for (int i = 0; i < graph.num_nodes; ++i) fy[i] = graph.frac_y[i];
        out = concat_cols(t, out, leaf(t, std::move(fy)));
    }
    return out;
}

struct ModelStep {
    int u_next = -1;   // tape id of the updated solution, flat [N]
    int coeffs = -1;   // tape id of the per-edge coefficients
    UpstreamGraph graph;
};

// One conservative model step for 1D transport: build the graph from the
// shifts, run encode-process-decode, apply the coefficients.
inline ModelStep model_step_1d(Tape& t, const BoundParams& bp, int u_id, const Field& xi,
                               const Grid1D& grid) {
    require(bp.params->config.dim == 1, "model_step_1d: config is not 1D");
    ModelStep out;
    out.graph = repair_orphans(build_1d(xi, grid));
    const int xi_id = leaf(t, Tensor::from_field(xi));
    int h = encode_1d(t, bp, u_id, xi_id);
    if (bp.params->config.upstream_coord_feature) h = append_coord_features(t, out.graph, h);
    h = process(t, bp, out.graph, h);
    out.coeffs = decode(t, bp, out.graph, h);
    out.u_next = apply_edge_coefficients(t, out.graph, out.coeffs, u_id);
    return out;
}

// One conservative model step on a 2D grid (linear transport or a frozen
// Vlasov stage); u_id is the flat [nx*ny] solution tensor.
inline ModelStep model_step_2d(Tape& t, const BoundParams& bp, int u_id, const Field& xi,
                               const Field& eta, const Grid2D& grid) {
    require(bp.params->config.dim == 2, "model_step_2d: config is not 2D");
    ModelStep out;
    out.graph = repair_orphans(build_2d(xi, eta, grid));
    const int xi_id = leaf(t, Tensor::from_field(xi));
    const int eta_id = leaf(t, Tensor::from_field(eta));
    int h = encode_2d(t, bp, u_id, xi_id, eta_id, grid.nx, grid.ny);
    if (bp.params->config.upstream_coord_feature) h = append_coord_features(t, out.graph, h);
    h = process(t, bp, out.graph, h);
    out.coeffs = decode(t, bp, out.graph, h);
    out.u_next = apply_edge_coefficients(t, out.graph, out.coeffs, u_id);
    return out;
}

// Inference helpers: one step on a throwaway tape.
inline Field model_apply_1d(const ModelParams& p, const Field& u, const Field& xi,
                            const Grid1D& grid) {
    Tape t;
    BoundParams bp = bind_params(t, p);
    const int u_id = leaf(t, Tensor::from_field(u));
    const ModelStep s = model_step_1d(t, bp, u_id, xi, grid);
    return t.value(s.u_next).to_field();
}

inline Field model_apply_2d(const ModelParams& p, const Field& u, const Field& xi,
                            const Field& eta, const Grid2D& grid) {
    Tape t;
    BoundParams bp = bind_params(t, p);
    const int u_id = leaf(t, Tensor::from_field(u));
    const ModelStep s = model_step_2d(t, bp, u_id, xi, eta, grid);
    return t.value(s.u_next).to_field();
}

} // namespace slgraph
