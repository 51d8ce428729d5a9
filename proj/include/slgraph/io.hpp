// On-disk formats: the binary container (JSON header + little-endian
// float64 blob) backing trajectory files and checkpoints, run configs with
// strict schema validation, and evaluation reports.
#pragma once

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "slgraph/grid.hpp"
#include "slgraph/model.hpp"
#include "slgraph/problems.hpp"

namespace slgraph {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian; big-endian hosts are unsupported");

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a over raw bytes; integrity tag for blobs and datasets.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Container: 8-byte magic, u64 header length, JSON header, float64 blob.

inline constexpr char kMagic[8] = {'S', 'L', 'G', 'B', 'I', 'N', '0', '1'};

inline void write_container(const std::string& path, const ordered_json& header,
                            const std::vector<double>& blob) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const std::string h = header.dump();
    const std::uint64_t hlen = h.size();
    os.write(kMagic, 8);
    os.write(reinterpret_cast<const char*>(&hlen), 8);
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    os.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::pair<ordered_json, std::vector<double>> read_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    std::uint64_t hlen = 0;
    is.read(magic, 8);
    is.read(reinterpret_cast<char*>(&hlen), 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a container file: " + path);
    std::string h(hlen, '\0');
    is.read(h.data(), static_cast<std::streamsize>(hlen));
    std::vector<char> rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(double) != 0)
        throw std::runtime_error("corrupt blob length: " + path);
    std::vector<double> blob(rest.size() / sizeof(double));
    std::memcpy(blob.data(), rest.data(), rest.size());
    return {ordered_json::parse(h), blob};
}

// ---------------------------------------------------------------------------
// Grid (de)serialization.

inline ordered_json grid_to_json(const Grid1D& g) {
    return ordered_json{{"dim", 1}, {"n", g.n}, {"x_min", g.x_min}, {"x_max", g.x_max}};
}

inline ordered_json grid_to_json(const Grid2D& g) {
    return ordered_json{{"dim", 2},      {"nx", g.nx},       {"ny", g.ny},
                        {"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min},
                        {"y_max", g.y_max}, {"y_periodic", g.y_periodic}};
}

inline Grid1D grid1d_from_json(const ordered_json& j) {
    return Grid1D(j.at("n").get<int>(), j.at("x_min").get<double>(), j.at("x_max").get<double>());
}

inline Grid2D grid2d_from_json(const ordered_json& j) {
    return Grid2D(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("x_min").get<double>(),
                  j.at("x_max").get<double>(), j.at("y_min").get<double>(),
                  j.at("y_max").get<double>(), j.at("y_periodic").get<bool>());
}

// ---------------------------------------------------------------------------
// TrajectoryFile: per-field per-step float64 records with a self-describing
// header. Steps hold `steps` states; shift fields hold `steps - 1` records.

struct TrajectoryFile {
    int format_version = 1;
    ordered_json grid;    // grid_to_json output
    ordered_json problem; // problem spec echo
    double cfl = 0.0;
    double dt = 0.0;
    int steps = 0;
    std::vector<std::string> fields;
    std::vector<double> step_dts; // per-step dt (closing step may differ)
    std::uint64_t rng_seed = 0;
    std::string generator;

    struct Record {
        std::string field;
        int step = 0;
        std::uint64_t offset = 0; // in doubles, relative to blob start
        std::uint64_t count = 0;
    };
    std::vector<Record> records;
    std::vector<double> blob;

    void add(const std::string& field, int step, const Field& values) {
        records.push_back({field, step, blob.size(), values.size()});
        blob.insert(blob.end(), values.values.begin(), values.values.end());
    }

    Field get(const std::string& field, int step) const {
        for (const Record& r : records)
            if (r.field == field && r.step == step) {
                Field f(r.count);
                std::copy(blob.begin() + static_cast<std::ptrdiff_t>(r.offset),
                          blob.begin() + static_cast<std::ptrdiff_t>(r.offset + r.count),
                          f.values.begin());
                return f;
            }
        throw std::runtime_error("trajectory record not found: " + field + "/" +
                                 std::to_string(step));
    }

    bool has(const std::string& field, int step) const {
        for (const Record& r : records)
            if (r.field == field && r.step == step) return true;
        return false;
    }
};

inline void write_trajectory(const std::string& path, const TrajectoryFile& t) {
    ordered_json h;
    h["format_version"] = t.format_version;
    h["kind"] = "trajectory";
    h["grid"] = t.grid;
    h["problem"] = t.problem;
    h["cfl"] = t.cfl;
    h["dt"] = t.dt;
    h["steps"] = t.steps;
    h["fields"] = t.fields;
    h["step_dts"] = t.step_dts;
    h["rng_seed"] = t.rng_seed;
    h["generator"] = t.generator;
    ordered_json recs = ordered_json::array();
    for (const auto& r : t.records)
        recs.push_back(ordered_json{{"field", r.field}, {"step", r.step}, {"offset", r.offset},
                                    {"count", r.count}});
    h["records"] = recs;
    h["blob_hash"] = hash_hex(fnv1a64(t.blob.data(), t.blob.size() * sizeof(double)));
    write_container(path, h, t.blob);
}

inline TrajectoryFile read_trajectory(const std::string& path) {
    auto [h, blob] = read_container(path);
    if (h.at("kind").get<std::string>() != "trajectory")
        throw std::runtime_error("not a trajectory file: " + path);
    TrajectoryFile t;
    t.format_version = h.at("format_version").get<int>();
    t.grid = h.at("grid");
    t.problem = h.at("problem");
    t.cfl = h.at("cfl").get<double>();
    t.dt = h.at("dt").get<double>();
    t.steps = h.at("steps").get<int>();
    t.fields = h.at("fields").get<std::vector<std::string>>();
    t.step_dts = h.at("step_dts").get<std::vector<double>>();
    t.rng_seed = h.at("rng_seed").get<std::uint64_t>();
    t.generator = h.at("generator").get<std::string>();
    for (const auto& r : h.at("records"))
        t.records.push_back({r.at("field").get<std::string>(), r.at("step").get<int>(),
                             r.at("offset").get<std::uint64_t>(), r.at("count").get<std::uint64_t>()});
    t.blob = std::move(blob);
    const std::string expect = h.at("blob_hash").get<std::string>();
    const std::string got = hash_hex(fnv1a64(t.blob.data(), t.blob.size() * sizeof(double)));
    if (expect != got) throw std::runtime_error("blob hash mismatch: " + path);
    return t;
}

// ---------------------------------------------------------------------------
// Checkpoint: model parameters plus provenance metadata.

struct Checkpoint {
    ModelParams params;
    double cfl_min = 0.0, cfl_max = 0.0;
    std::string problem_family;
    std::string dataset_hash;
};

inline ordered_json model_config_to_json(const ModelConfig& c) {
    return ordered_json{{"dim", c.dim},
                        {"encoder_layers", c.encoder_layers},
                        {"filters", c.filters},
                        {"kernel", c.kernel},
                        {"gat_layers", c.gat_layers},
                        {"heads", c.heads},
                        {"features", c.features},
                        {"decoder_hidden", c.decoder_hidden},
                        {"y_periodic", c.y_periodic},
                        {"self_loops", c.self_loops},
                        {"attention_v2", c.attention_v2},
                        {"upstream_coord_feature", c.upstream_coord_feature},
                        {"leaky_slope", c.leaky_slope}};
}

inline ModelConfig model_config_from_json(const ordered_json& j) {
    ModelConfig c;
    c.dim = j.at("dim").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.filters = j.at("filters").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.gat_layers = j.at("gat_layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.features = j.at("features").get<int>();
    c.decoder_hidden = j.at("decoder_hidden").get<int>();
    c.y_periodic = j.at("y_periodic").get<bool>();
    c.self_loops = j.at("self_loops").get<bool>();
    c.attention_v2 = j.at("attention_v2").get<bool>();
    c.upstream_coord_feature = j.at("upstream_coord_feature").get<bool>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.validate();
    return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    ordered_json h;
    h["format_version"] = 1;
    h["kind"] = "checkpoint";
    h["config"] = model_config_to_json(cp.params.config);
    h["trained_cfl_range"] = ordered_json::array({cp.cfl_min, cp.cfl_max});
    h["problem_family"] = cp.problem_family;
    h["dataset_hash"] = cp.dataset_hash;
    ordered_json tensors = ordered_json::array();
    std::vector<double> blob;
    for (std::size_t i = 0; i < cp.params.names.size(); ++i) {
        const Tensor& t = cp.params.tensors[i];
        tensors.push_back(ordered_json{{"name", cp.params.names[i]},
                                       {"shape", t.shape},
                                       {"dtype", "f64"},
                                       {"offset", blob.size()},
                                       {"count", t.numel()}});
        blob.insert(blob.end(), t.data.begin(), t.data.end());
    }
    h["tensors"] = tensors;
    h["blob_hash"] = hash_hex(fnv1a64(blob.data(), blob.size() * sizeof(double)));
    write_container(path, h, blob);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto [h, blob] = read_container(path);
    if (h.at("kind").get<std::string>() != "checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint cp;
    cp.params.config = model_config_from_json(h.at("config"));
    cp.cfl_min = h.at("trained_cfl_range")[0].get<double>();
    cp.cfl_max = h.at("trained_cfl_range")[1].get<double>();
    cp.problem_family = h.at("problem_family").get<std::string>();
    cp.dataset_hash = h.at("dataset_hash").get<std::string>();
    for (const auto& rec : h.at("tensors")) {
        if (rec.at("dtype").get<std::string>() != "f64")
            throw std::runtime_error("unsupported tensor dtype");
        cp.params.names.push_back(rec.at("name").get<std::string>());
        Tensor t(rec.at("shape").get<std::vector<int>>());
        const auto off = rec.at("offset").get<std::uint64_t>();
        const auto cnt = rec.at("count").get<std::uint64_t>();
        if (cnt != t.numel()) throw std::runtime_error("tensor record count mismatch");
        std::copy(blob.begin() + static_cast<std::ptrdiff_t>(off),
                  blob.begin() + static_cast<std::ptrdiff_t>(off + cnt), t.data.begin());
        cp.params.tensors.push_back(std::move(t));
    }
    return cp;
}

// ---------------------------------------------------------------------------
// Run configuration with strict key validation: unknown keys anywhere in the
// document are rejected.

inline void check_keys(const ordered_json& obj, const std::string& path,
                       const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + path + " must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError("config: unknown key '" + path + key + "'");
}

struct ProblemSpec {
    std::string family; // advect1d_square | advect1d_triangle_square |
                        // advect1d_variable | advect2d_square | swirl |
                        // swirl_two_bell | vp_landau | vp_two_stream |
                        // vp_multi_mode
    int dim = 1;
    bool vp = false;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    double velocity = 1.0;     // constant-advection speed (both axes in 2D)
    double swirl_period = 2.0;
    Range height{0.1, 1.0};
    Range width{0.2, 0.4};
    Range center{0.0, 0.0}; // collapsed: fixed at the domain center
    Range r0{4.0, 6.0};
    Range center_x{0.25, 0.75}, center_y{0.25, 0.75};
    Range alpha{0.05, 0.45};
    double k = 0.5;
};

inline Range range_from_json(const ordered_json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("config: " + path + " must be [lo, hi]");
    Range r{j[0].get<double>(), j[1].get<double>()};
    if (r.lo > r.hi) throw ConfigError("config: " + path + " has lo > hi");
    return r;
}

inline ProblemSpec problem_from_json(const ordered_json& j) {
    ProblemSpec p;
    p.family = j.at("family").get<std::string>();
    auto opt_range = [&](const char* key, Range& into) {
        if (j.contains(key)) into = range_from_json(j.at(key), std::string("problem.") + key);
    };
    auto opt_num = [&](const char* key, double& into) {
        if (j.contains(key)) into = j.at(key).get<double>();
    };
    if (p.family == "advect1d_square" || p.family == "advect1d_triangle_square") {
        check_keys(j, "problem.", {"family", "x_min", "x_max", "velocity", "height_range",
                                   "width_range", "center_range"});
        p.dim = 1;
        p.x_min = 0.0;
        p.x_max = 1.0;
        opt_num("x_min", p.x_min);
        opt_num("x_max", p.x_max);
        opt_num("velocity", p.velocity);
        p.height = p.family == "advect1d_square" ? Range{0.1, 1.0} : Range{0.2, 0.8};
        p.width = p.family == "advect1d_square" ? Range{0.2, 0.4} : Range{0.2, 0.3};
        p.center = Range{0.0, 0.0};
        opt_range("height_range", p.height);
        opt_range("width_range", p.width);
        opt_range("center_range", p.center);
    } else if (p.family == "advect1d_variable") {
        check_keys(j, "problem.", {"family", "height_range", "width_range", "center_range"});
        p.dim = 1;
        p.x_min = 0.0;
        p.x_max = 2.0 * kPi;
        p.height = {0.1, 1.0};
        p.width = {2.5, 3.5};
        p.center = {0.0, 2.0 * kPi};
        opt_range("height_range", p.height);
        opt_range("width_range", p.width);
        opt_range("center_range", p.center);
    } else if (p.family == "advect2d_square") {
        check_keys(j, "problem.", {"family", "velocity", "height_range", "width_range"});
        p.dim = 2;
        p.x_min = p.y_min = -1.0;
        p.x_max = p.y_max = 1.0;
        opt_num("velocity", p.velocity);
        p.height = {0.5, 1.0};
        p.width = {0.3, 0.5};
        opt_range("height_range", p.height);
        opt_range("width_range", p.width);
    } else if (p.family == "swirl" || p.family == "swirl_two_bell") {
        check_keys(j, "problem.", {"family", "period", "r0_range", "cx_range", "cy_range"});
        p.dim = 2;
        p.x_min = p.y_min = 0.0;
        p.x_max = p.y_max = 1.0;
        opt_num("period", p.swirl_period);
        opt_range("r0_range", p.r0);
        opt_range("cx_range", p.center_x);
        opt_range("cy_range", p.center_y);
    } else if (p.family == "vp_landau" || p.family == "vp_two_stream" ||
               p.family == "vp_multi_mode") {
        check_keys(j, "problem.", {"family", "k", "length", "v_cut", "alpha_range"});
        p.dim = 2;
        p.vp = true;
        p.k = 0.5;
        opt_num("k", p.k);
        p.x_min = 0.0;
        p.x_max = 4.0 * kPi;
        if (j.contains("length")) p.x_max = j.at("length").get<double>();
        double vc = 2.0 * kPi;
        if (j.contains("v_cut")) vc = j.at("v_cut").get<double>();
        p.y_min = -vc;
        p.y_max = vc;
        p.alpha = p.family == "vp_landau" ? Range{0.05, 0.45}
                 : p.family == "vp_two_stream" ? Range{0.01, 0.05}
                                               : Range{0.01, 0.02};
        opt_range("alpha_range", p.alpha);
    } else {
        throw ConfigError("config: unknown problem family '" + p.family + "'");
    }
    return p;
}

inline ordered_json problem_to_json(const ProblemSpec& p) {
    ordered_json j;
    j["family"] = p.family;
    if (p.dim == 1) {
        j["x_min"] = p.x_min;
        j["x_max"] = p.x_max;
        j["velocity"] = p.velocity;
        j["height_range"] = {p.height.lo, p.height.hi};
        j["width_range"] = {p.width.lo, p.width.hi};
        j["center_range"] = {p.center.lo, p.center.hi};
    } else if (!p.vp) {
        j["velocity"] = p.velocity;
        j["period"] = p.swirl_period;
        j["height_range"] = {p.height.lo, p.height.hi};
        j["width_range"] = {p.width.lo, p.width.hi};
        j["r0_range"] = {p.r0.lo, p.r0.hi};
        j["cx_range"] = {p.center_x.lo, p.center_x.hi};
        j["cy_range"] = {p.center_y.lo, p.center_y.hi};
    } else {
        j["k"] = p.k;
        j["length"] = p.x_max;
        j["v_cut"] = p.y_max;
        j["alpha_range"] = {p.alpha.lo, p.alpha.hi};
    }
    return j;
}

struct RunConfig {
    ProblemSpec problem;
    // data generation
    int n_hi = 256, ny_hi = 0; // fine grid (ny for 2D; 0 means same as n_hi)
    int coarsen_factor = 8;
    int trajectories = 30;
    int steps = 20;           // coarse steps per trajectory (linear problems)
    double t_end = 0.0;       // trajectory horizon (2D swirl / VP; 0: use steps)
    Range cfl{6.0, 10.2};     // coarse-step CFL, sampled per trajectory
    double fine_cfl = 0.4;
    std::uint64_t seed = 1;
    // training
    int epochs = 300;
    double lr = 1e-3;
    int batch_pairs = 32;
    double val_fraction = 0.1;
    int patience = 50;
    int unroll_steps = 8;
    // vp run
    double vp_cfl = 10.8;
    int rkei_order = 2;
    ModelConfig model;
};

inline RunConfig config_from_json(const ordered_json& j) {
    check_keys(j, "", {"problem", "data", "train", "model", "vp", "seed"});
    RunConfig c;
    c.problem = problem_from_json(j.at("problem"));
    c.model.dim = c.problem.dim;
    c.model.y_periodic = !c.problem.vp;
    if (c.problem.vp) c.model.encoder_layers = 9;
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data.", {"n_hi", "ny_hi", "coarsen_factor", "trajectories", "steps",
                                "t_end", "cfl_range", "fine_cfl"});
        if (d.contains("n_hi")) c.n_hi = d.at("n_hi").get<int>();
        if (d.contains("ny_hi")) c.ny_hi = d.at("ny_hi").get<int>();
        if (d.contains("coarsen_factor")) c.coarsen_factor = d.at("coarsen_factor").get<int>();
        if (d.contains("trajectories")) c.trajectories = d.at("trajectories").get<int>();
        if (d.contains("steps")) c.steps = d.at("steps").get<int>();
        if (d.contains("t_end")) c.t_end = d.at("t_end").get<double>();
        if (d.contains("cfl_range")) c.cfl = range_from_json(d.at("cfl_range"), "data.cfl_range");
        if (d.contains("fine_cfl")) c.fine_cfl = d.at("fine_cfl").get<double>();
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, "train.",
                   {"epochs", "lr", "batch_pairs", "val_fraction", "patience", "unroll_steps"});
        if (t.contains("epochs")) c.epochs = t.at("epochs").get<int>();
        if (t.contains("lr")) c.lr = t.at("lr").get<double>();
        if (t.contains("batch_pairs")) c.batch_pairs = t.at("batch_pairs").get<int>();
        if (t.contains("val_fraction")) c.val_fraction = t.at("val_fraction").get<double>();
        if (t.contains("patience")) c.patience = t.at("patience").get<int>();
        if (t.contains("unroll_steps")) c.unroll_steps = t.at("unroll_steps").get<int>();
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, "model.",
                   {"encoder_layers", "filters", "kernel", "gat_layers", "heads", "features",
                    "decoder_hidden", "self_loops", "attention_v2", "upstream_coord_feature"});
        if (m.contains("encoder_layers")) c.model.encoder_layers = m.at("encoder_layers").get<int>();
        if (m.contains("filters")) c.model.filters = m.at("filters").get<int>();
        if (m.contains("kernel")) c.model.kernel = m.at("kernel").get<int>();
        if (m.contains("gat_layers")) c.model.gat_layers = m.at("gat_layers").get<int>();
        if (m.contains("heads")) c.model.heads = m.at("heads").get<int>();
        if (m.contains("features")) c.model.features = m.at("features").get<int>();
        if (m.contains("decoder_hidden")) c.model.decoder_hidden = m.at("decoder_hidden").get<int>();
        if (m.contains("self_loops")) c.model.self_loops = m.at("self_loops").get<bool>();
        if (m.contains("attention_v2")) c.model.attention_v2 = m.at("attention_v2").get<bool>();
        if (m.contains("upstream_coord_feature"))
            c.model.upstream_coord_feature = m.at("upstream_coord_feature").get<bool>();
    }
    if (j.contains("vp")) {
        const auto& v = j.at("vp");
        check_keys(v, "vp.", {"cfl", "rkei_order", "t_end"});
        if (v.contains("cfl")) c.vp_cfl = v.at("cfl").get<double>();
        if (v.contains("rkei_order")) c.rkei_order = v.at("rkei_order").get<int>();
        if (v.contains("t_end")) c.t_end = v.at("t_end").get<double>();
    }
    c.model.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    ordered_json j;
    try {
        j = ordered_json::parse(is);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

} // namespace slgraph
