// Minimal reverse-mode automatic differentiation tape and the tensor
// primitives needed by the coefficient network: circular convolutions,
// dense layers, activations, segment softmax over variable-size
// neighborhoods, gather/scatter, the per-donor conservation correction,
// and the Adam optimizer.
//
// The graph topology changes every time step, so the tape is rebuilt per
// forward pass. All reductions run in a fixed order; forward and backward
// results are bit-reproducible for identical inputs.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "slgraph/tensor.hpp"

namespace slgraph {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int)>;

    int add_node(Tensor value, BackwardFn backward = nullptr) {
        nodes_.push_back({std::move(value), std::move(backward)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor& value(int id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }

    Tensor& grad(int id) {
        if (grads_.empty()) throw std::logic_error("Tape::grad: backward has not run");
        return grads_[id];
    }

    // Reverse sweep from a scalar loss node. May be called once per tape.
    void backward(int loss_id) {
        if (backward_done_) throw std::logic_error("Tape::backward: called twice without reset");
        if (nodes_[loss_id].value.numel() != 1)
            throw std::invalid_argument("Tape::backward: loss must be scalar");
        grads_.clear();
        grads_.reserve(nodes_.size());
        for (const auto& n : nodes_) grads_.emplace_back(n.value.shape, 0.0);
        grads_[loss_id].data[0] = 1.0;
        for (int id = loss_id; id >= 0; --id)
            if (nodes_[id].backward) nodes_[id].backward(*this, id);
        backward_done_ = true;
    }

    void reset() {
        nodes_.clear();
        grads_.clear();
        backward_done_ = false;
    }

private:
    struct Node {
        Tensor value;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Each returns the id of a new tape node.

inline int leaf(Tape& t, Tensor v) { return t.add_node(std::move(v)); }

inline int add(Tape& t, int a, int b) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(b);
    require(x.same_shape(y), "add: shape mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i];
    return t.add_node(std::move(out), [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

inline int sub(Tape& t, int a, int b) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(b);
    require(x.same_shape(y), "sub: shape mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= y[i];
    return t.add_node(std::move(out), [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

inline int mul(Tape& t, int a, int b) {
    const Tensor& x = t.value(a);
    const Tensor& y = t.value(b);
    require(x.same_shape(y), "mul: shape mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= y[i];
    return t.add_node(std::move(out), [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& x = tp.value(a);
        const Tensor& y = tp.value(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i] * y[i];
            gb[i] += g[i] * x[i];
        }
    });
}

inline int scale(Tape& t, int a, double c) {
    Tensor out = t.value(a);
    for (double& v : out.data) v *= c;
    return t.add_node(std::move(out), [a, c](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
    });
}

inline int sum_all(Tape& t, int a) {
    const Tensor& x = t.value(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    Tensor out({1});
    out[0] = s;
    return t.add_node(std::move(out), [a](Tape& tp, int self) {
        const double g = tp.grad(self)[0];
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

inline int elu(Tape& t, int a) {
    Tensor out = t.value(a);
    for (double& v : out.data) v = v >= 0.0 ? v : std::expm1(v);
    return t.add_node(std::move(out), [a](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.numel(); ++i)
            ga[i] += g[i] * (x[i] >= 0.0 ? 1.0 : y[i] + 1.0);
    });
}

inline int leaky_relu(Tape& t, int a, double slope = 0.2) {
    Tensor out = t.value(a);
    for (double& v : out.data) v = v >= 0.0 ? v : slope * v;
    return t.add_node(std::move(out), [a, slope](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& x = tp.value(a);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.numel(); ++i)
            ga[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
    });
}

// y = x W + b with x[M,F], W[F,G], b[G].
inline int linear(Tape& t, int x, int w, int b) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    const Tensor& B = t.value(b);
    require(X.rank() == 2 && W.rank() == 2 && B.rank() == 1, "linear: bad ranks");
    const int M = X.shape[0], F = X.shape[1], G = W.shape[1];
    require(W.shape[0] == F && B.shape[0] == G, "linear: shape mismatch");
    Tensor out({M, G});
    MapM(out.data.data(), M, G).noalias() =
        MapC(X.data.data(), M, F) * MapC(W.data.data(), F, G);
    for (int m = 0; m < M; ++m)
        for (int g = 0; g < G; ++g) out.data[static_cast<std::size_t>(m) * G + g] += B[g];
    return t.add_node(std::move(out), [x, w, b, M, F, G](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& X = tp.value(x);
        const Tensor& W = tp.value(w);
        MapC Gm(g.data.data(), M, G);
        MapM(tp.grad(x).data.data(), M, F).noalias() += Gm * MapC(W.data.data(), F, G).transpose();
        MapM(tp.grad(w).data.data(), F, G).noalias() +=
            MapC(X.data.data(), M, F).transpose() * Gm;
        Tensor& gb = tp.grad(b);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < G; ++k) gb[k] += g.data[static_cast<std::size_t>(m) * G + k];
    });
}

inline int concat_cols(Tape& t, int a, int b) {
    const Tensor& X = t.value(a);
    const Tensor& Y = t.value(b);
    require(X.rank() == 2 && Y.rank() == 2 && X.shape[0] == Y.shape[0],
            "concat_cols: shape mismatch");
    const int M = X.shape[0], Fa = X.shape[1], Fb = Y.shape[1];
    Tensor out({M, Fa + Fb});
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < Fa; ++k)
            out.data[static_cast<std::size_t>(m) * (Fa + Fb) + k] = X.data[static_cast<std::size_t>(m) * Fa + k];
        for (int k = 0; k < Fb; ++k)
            out.data[static_cast<std::size_t>(m) * (Fa + Fb) + Fa + k] = Y.data[static_cast<std::size_t>(m) * Fb + k];
    }
    return t.add_node(std::move(out), [a, b, M, Fa, Fb](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (int m = 0; m < M; ++m) {
            for (int k = 0; k < Fa; ++k)
                ga[static_cast<std::size_t>(m) * Fa + k] += g[static_cast<std::size_t>(m) * (Fa + Fb) + k];
            for (int k = 0; k < Fb; ++k)
                gb[static_cast<std::size_t>(m) * Fb + k] += g[static_cast<std::size_t>(m) * (Fa + Fb) + Fa + k];
        }
    });
}

inline int transpose2(Tape& t, int a) {
    const Tensor& X = t.value(a);
    require(X.rank() == 2, "transpose2: rank must be 2");
    const int A = X.shape[0], B = X.shape[1];
    Tensor out({B, A});
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < B; ++j)
            out.data[static_cast<std::size_t>(j) * A + i] = X.data[static_cast<std::size_t>(i) * B + j];
    return t.add_node(std::move(out), [a, A, B](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (int i = 0; i < A; ++i)
            for (int j = 0; j < B; ++j)
                ga[static_cast<std::size_t>(i) * B + j] += g[static_cast<std::size_t>(j) * A + i];
    });
}

inline int reshape(Tape& t, int a, std::vector<int> shape) {
    Tensor out(shape);
    require(out.numel() == t.value(a).numel(), "reshape: numel mismatch");
    out.data = t.value(a).data;
    return t.add_node(std::move(out), [a](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
}

// Stacks C same-length vectors into a [C, W] tensor.
inline int stack_rows(Tape& t, const std::vector<int>& xs) {
    require(!xs.empty(), "stack_rows: empty input");
    const int W = static_cast<int>(t.value(xs[0]).numel());
    const int C = static_cast<int>(xs.size());
    Tensor out({C, W});
    for (int c = 0; c < C; ++c) {
        const Tensor& x = t.value(xs[c]);
        require(static_cast<int>(x.numel()) == W, "stack_rows: length mismatch");
        for (int k = 0; k < W; ++k) out.data[static_cast<std::size_t>(c) * W + k] = x.data[k];
    }
    std::vector<int> ids = xs;
    return t.add_node(std::move(out), [ids, W](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        for (std::size_t c = 0; c < ids.size(); ++c) {
            Tensor& gx = tp.grad(ids[c]);
            for (int k = 0; k < W; ++k) gx[k] += g[c * W + k];
        }
    });
}

// ---------------------------------------------------------------------------
// Convolutions, realized as im2col followed by a dense product.

namespace detail {

inline int wrap_index(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

// x[Cin, N] circular -> column matrix [Cin*K, N].
inline void im2col_1d(const Tensor& x, int K, std::vector<double>& col) {
    const int Cin = x.shape[0], N = x.shape[1], half = K / 2;
    col.assign(static_cast<std::size_t>(Cin) * K * N, 0.0);
    for (int ci = 0; ci < Cin; ++ci)
        for (int k = 0; k < K; ++k) {
            double* dst = col.data() + (static_cast<std::size_t>(ci) * K + k) * N;
            const double* src = x.data.data() + static_cast<std::size_t>(ci) * N;
            for (int p = 0; p < N; ++p) dst[p] = src[wrap_index(p + k - half, N)];
        }
}

// x[Cin, Ny, Nx] -> [Cin*K*K, Ny*Nx]; x axis periodic, y axis periodic or
// zero-padded.
inline void im2col_2d(const Tensor& x, int K, bool y_periodic, std::vector<double>& col) {
    const int Cin = x.shape[0], Ny = x.shape[1], Nx = x.shape[2], half = K / 2;
    const std::size_t plane = static_cast<std::size_t>(Ny) * Nx;
    col.assign(static_cast<std::size_t>(Cin) * K * K * plane, 0.0);
    for (int ci = 0; ci < Cin; ++ci)
        for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
                double* dst = col.data() + ((static_cast<std::size_t>(ci) * K + ky) * K + kx) * plane;
                const double* src = x.data.data() + static_cast<std::size_t>(ci) * plane;
                for (int y = 0; y < Ny; ++y) {
                    int yy = y + ky - half;
                    if (y_periodic) yy = wrap_index(yy, Ny);
                    if (yy < 0 || yy >= Ny) continue; // zero padding
                    for (int xx = 0; xx < Nx; ++xx)
                        dst[static_cast<std::size_t>(y) * Nx + xx] =
                            src[static_cast<std::size_t>(yy) * Nx + wrap_index(xx + kx - half, Nx)];
                }
            }
}

} // namespace detail

// Cross-correlation of x[Cin, N] with kernels w[Cout, Cin, K] plus bias,
// circular padding, output length preserved.
inline int conv1d_circular(Tape& t, int x, int w, int b) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    const Tensor& B = t.value(b);
    require(X.rank() == 2 && W.rank() == 3 && B.rank() == 1, "conv1d: bad ranks");
    const int Cin = X.shape[0], N = X.shape[1];
    const int Cout = W.shape[0], K = W.shape[2];
    require(W.shape[1] == Cin && B.shape[0] == Cout, "conv1d: shape mismatch");
    require(K % 2 == 1, "conv1d: kernel size must be odd");
    std::vector<double> col;
    detail::im2col_1d(X, K, col);
    Tensor out({Cout, N});
    MapM(out.data.data(), Cout, N).noalias() =
        MapC(W.data.data(), Cout, Cin * K) * MapC(col.data(), Cin * K, N);
    for (int co = 0; co < Cout; ++co)
        for (int p = 0; p < N; ++p) out.data[static_cast<std::size_t>(co) * N + p] += B[co];
    return t.add_node(std::move(out), [x, w, b, Cin, N, Cout, K](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& X = tp.value(x);
        const Tensor& W = tp.value(w);
        std::vector<double> col;
        detail::im2col_1d(X, K, col);
        MapC Gm(g.data.data(), Cout, N);
        MapM(tp.grad(w).data.data(), Cout, Cin * K).noalias() +=
            Gm * MapC(col.data(), Cin * K, N).transpose();
        Tensor& gb = tp.grad(b);
        for (int co = 0; co < Cout; ++co)
            for (int p = 0; p < N; ++p) gb[co] += g[static_cast<std::size_t>(co) * N + p];
        std::vector<double> gcol(static_cast<std::size_t>(Cin) * K * N);
        MapM(gcol.data(), Cin * K, N).noalias() =
            MapC(W.data.data(), Cout, Cin * K).transpose() * Gm;
        Tensor& gx = tp.grad(x);
        const int half = K / 2;
        for (int ci = 0; ci < Cin; ++ci)
            for (int k = 0; k < K; ++k) {
                const double* src = gcol.data() + (static_cast<std::size_t>(ci) * K + k) * N;
                double* dst = gx.data.data() + static_cast<std::size_t>(ci) * N;
                for (int p = 0; p < N; ++p) dst[detail::wrap_index(p + k - half, N)] += src[p];
            }
    });
}

// Cross-correlation of x[Cin, Ny, Nx] with w[Cout, Cin, K, K]; the x axis is
// always circular, the y axis is circular or zero-padded.
inline int conv2d_circular(Tape& t, int x, int w, int b, bool y_periodic) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    const Tensor& B = t.value(b);
    require(X.rank() == 3 && W.rank() == 4 && B.rank() == 1, "conv2d: bad ranks");
    const int Cin = X.shape[0], Ny = X.shape[1], Nx = X.shape[2];
    const int Cout = W.shape[0], K = W.shape[2];
    require(W.shape[1] == Cin && W.shape[3] == K && B.shape[0] == Cout, "conv2d: shape mismatch");
    require(K % 2 == 1, "conv2d: kernel size must be odd");
    const int P = Ny * Nx;
    std::vector<double> col;
    detail::im2col_2d(X, K, y_periodic, col);
    Tensor out({Cout, Ny, Nx});
    MapM(out.data.data(), Cout, P).noalias() =
        MapC(W.data.data(), Cout, Cin * K * K) * MapC(col.data(), Cin * K * K, P);
    for (int co = 0; co < Cout; ++co)
        for (int p = 0; p < P; ++p) out.data[static_cast<std::size_t>(co) * P + p] += B[co];
    return t.add_node(std::move(out), [x, w, b, Cin, Ny, Nx, Cout, K, y_periodic](Tape& tp,
                                                                                  int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& X = tp.value(x);
        const Tensor& W = tp.value(w);
        const int P = Ny * Nx;
        std::vector<double> col;
        detail::im2col_2d(X, K, y_periodic, col);
        MapC Gm(g.data.data(), Cout, P);
        MapM(tp.grad(w).data.data(), Cout, Cin * K * K).noalias() +=
            Gm * MapC(col.data(), Cin * K * K, P).transpose();
        Tensor& gb = tp.grad(b);
        for (int co = 0; co < Cout; ++co)
            for (int p = 0; p < P; ++p) gb[co] += g[static_cast<std::size_t>(co) * P + p];
        std::vector<double> gcol(static_cast<std::size_t>(Cin) * K * K * P);
        MapM(gcol.data(), Cin * K * K, P).noalias() =
            MapC(W.data.data(), Cout, Cin * K * K).transpose() * Gm;
        Tensor& gx = tp.grad(x);
        const int half = K / 2;
        for (int ci = 0; ci < Cin; ++ci)
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    const double* src =
                        gcol.data() + ((static_cast<std::size_t>(ci) * K + ky) * K + kx) * P;
                    double* dst = gx.data.data() + static_cast<std::size_t>(ci) * P;
                    for (int y = 0; y < Ny; ++y) {
                        int yy = y + ky - half;
                        if (y_periodic) yy = detail::wrap_index(yy, Ny);
                        if (yy < 0 || yy >= Ny) continue;
                        for (int xx = 0; xx < Nx; ++xx)
                            dst[static_cast<std::size_t>(yy) * Nx +
                                detail::wrap_index(xx + kx - half, Nx)] +=
                                src[static_cast<std::size_t>(y) * Nx + xx];
                    }
                }
    });
}

// ---------------------------------------------------------------------------
// Graph data movement.

inline int gather_rows(Tape& t, int x, std::vector<int> idx) {
    const Tensor& X = t.value(x);
    const int W = X.rank() == 1 ? 1 : X.row_width();
    const int N = X.shape[0];
    const int E = static_cast<int>(idx.size());
    for (int i : idx) require(i >= 0 && i < N, "gather_rows: index out of range");
    Tensor out(X.rank() == 1 ? std::vector<int>{E} : std::vector<int>{E, W});
    for (int e = 0; e < E; ++e)
        for (int k = 0; k < W; ++k)
            out.data[static_cast<std::size_t>(e) * W + k] =
                X.data[static_cast<std::size_t>(idx[e]) * W + k];
    return t.add_node(std::move(out), [x, idx = std::move(idx), W](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t e = 0; e < idx.size(); ++e)
            for (int k = 0; k < W; ++k)
                gx[static_cast<std::size_t>(idx[e]) * W + k] += g[e * W + k];
    });
}

// Accumulates edge rows into destination node rows, in edge order.
inline int scatter_sum_rows(Tape& t, int x, std::vector<int> dst, int num_nodes) {
    const Tensor& X = t.value(x);
    const int W = X.rank() == 1 ? 1 : X.row_width();
    const int E = X.shape[0];
    require(static_cast<int>(dst.size()) == E, "scatter_sum_rows: index count mismatch");
    for (int i : dst) require(i >= 0 && i < num_nodes, "scatter_sum_rows: index out of range");
    Tensor out(X.rank() == 1 ? std::vector<int>{num_nodes} : std::vector<int>{num_nodes, W}, 0.0);
    for (int e = 0; e < E; ++e)
        for (int k = 0; k < W; ++k)
            out.data[static_cast<std::size_t>(dst[e]) * W + k] +=
                X.data[static_cast<std::size_t>(e) * W + k];
    return t.add_node(std::move(out), [x, dst = std::move(dst), W](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t e = 0; e < dst.size(); ++e)
            for (int k = 0; k < W; ++k)
                gx[e * W + k] += g[static_cast<std::size_t>(dst[e]) * W + k];
    });
}

// Softmax within each contiguous segment, independently per column,
// max-subtracted for stability. Segments are given by offsets (size S+1).
inline int segment_softmax(Tape& t, int x, std::vector<int> offsets) {
    const Tensor& X = t.value(x);
    require(X.rank() == 2, "segment_softmax: rank must be 2");
    const int H = X.shape[1];
    require(!offsets.empty() && offsets.back() == X.shape[0], "segment_softmax: bad offsets");
    Tensor out = X;
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const int lo = offsets[s], hi = offsets[s + 1];
        require(hi > lo, "segment_softmax: empty segment");
        for (int h = 0; h < H; ++h) {
            double m = -1e300;
            for (int e = lo; e < hi; ++e) m = std::max(m, X.data[static_cast<std::size_t>(e) * H + h]);
            double z = 0.0;
            for (int e = lo; e < hi; ++e) {
                double& v = out.data[static_cast<std::size_t>(e) * H + h];
                v = std::exp(X.data[static_cast<std::size_t>(e) * H + h] - m);
                z += v;
            }
            for (int e = lo; e < hi; ++e) out.data[static_cast<std::size_t>(e) * H + h] /= z;
        }
    }
    return t.add_node(std::move(out), [x, offsets = std::move(offsets), H](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
            const int lo = offsets[s], hi = offsets[s + 1];
            for (int h = 0; h < H; ++h) {
                double dot = 0.0;
                for (int e = lo; e < hi; ++e)
                    dot += g[static_cast<std::size_t>(e) * H + h] * y[static_cast<std::size_t>(e) * H + h];
                for (int e = lo; e < hi; ++e)
                    gx[static_cast<std::size_t>(e) * H + h] +=
                        y[static_cast<std::size_t>(e) * H + h] *
                        (g[static_cast<std::size_t>(e) * H + h] - dot);
            }
        }
    });
}

// out[m, g] = x[m, g] * v[g] (row-broadcast multiply).
inline int mul_rowvec(Tape& t, int x, int v) {
    const Tensor& X = t.value(x);
    const Tensor& V = t.value(v);
    require(X.rank() == 2 && V.rank() == 1 && V.shape[0] == X.shape[1], "mul_rowvec: shape");
    const int M = X.shape[0], G = X.shape[1];
    Tensor out = X;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < G; ++k) out.data[static_cast<std::size_t>(m) * G + k] *= V[k];
    return t.add_node(std::move(out), [x, v, M, G](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& X = tp.value(x);
        const Tensor& V = tp.value(v);
        Tensor& gx = tp.grad(x);
        Tensor& gv = tp.grad(v);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < G; ++k) {
                const std::size_t p = static_cast<std::size_t>(m) * G + k;
                gx[p] += g[p] * V[k];
                gv[k] += g[p] * X[p];
            }
    });
}

// Sums H contiguous blocks of F columns: x[M, H*F] -> out[M, H].
inline int block_sum(Tape& t, int x, int H) {
    const Tensor& X = t.value(x);
    require(X.rank() == 2 && X.shape[1] % H == 0, "block_sum: width not divisible by H");
    const int M = X.shape[0], F = X.shape[1] / H;
    Tensor out({M, H}, 0.0);
    for (int m = 0; m < M; ++m)
        for (int h = 0; h < H; ++h) {
            double s = 0.0;
            for (int f = 0; f < F; ++f)
                s += X.data[static_cast<std::size_t>(m) * H * F + h * F + f];
            out.data[static_cast<std::size_t>(m) * H + h] = s;
        }
    return t.add_node(std::move(out), [x, H](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        const int M = g.shape[0];
        const int F = gx.shape[1] / H;
        for (int m = 0; m < M; ++m)
            for (int h = 0; h < H; ++h)
                for (int f = 0; f < F; ++f)
                    gx[static_cast<std::size_t>(m) * H * F + h * F + f] +=
                        g[static_cast<std::size_t>(m) * H + h];
    });
}

// out[e, h*F + f] = x[e, h*F + f] * a[e, h]; per-head scaling of messages by
// attention weights.
inline int head_scale(Tape& t, int x, int a) {
    const Tensor& X = t.value(x);
    const Tensor& A = t.value(a);
    require(X.rank() == 2 && A.rank() == 2 && X.shape[0] == A.shape[0], "head_scale: shape");
    const int H = A.shape[1];
    require(X.shape[1] % H == 0, "head_scale: width not divisible by heads");
    const int E = X.shape[0], F = X.shape[1] / H;
    Tensor out = X;
    for (int e = 0; e < E; ++e)
        for (int h = 0; h < H; ++h) {
            const double w = A.data[static_cast<std::size_t>(e) * H + h];
            for (int f = 0; f < F; ++f)
                out.data[(static_cast<std::size_t>(e) * H + h) * F + f] *= w;
        }
    return t.add_node(std::move(out), [x, a, H](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& X = tp.value(x);
        const Tensor& A = tp.value(a);
        Tensor& gx = tp.grad(x);
        Tensor& ga = tp.grad(a);
        const int E = X.shape[0], F = X.shape[1] / H;
        for (int e = 0; e < E; ++e)
            for (int h = 0; h < H; ++h) {
                const double w = A[static_cast<std::size_t>(e) * H + h];
                double dot = 0.0;
                for (int f = 0; f < F; ++f) {
                    const std::size_t p = (static_cast<std::size_t>(e) * H + h) * F + f;
                    gx[p] += g[p] * w;
                    dot += g[p] * X[p];
                }
                ga[static_cast<std::size_t>(e) * H + h] += dot;
            }
    });
}

// Conservation correction: within each donor group (CSR over edge ids), add
// (1 - sum)/count to every coefficient. Affine, parameter-free, and exactly
// mass conserving for any input.
inline int group_sum_to_one(Tape& t, int x, std::vector<int> offsets, std::vector<int> edge_ids) {
    const Tensor& X = t.value(x);
    require(X.rank() == 1, "group_sum_to_one: expects flat coefficients");
    Tensor out = X;
    for (std::size_t j = 0; j + 1 < offsets.size(); ++j) {
        const int lo = offsets[j], hi = offsets[j + 1];
        require(hi > lo, "group_sum_to_one: empty donor group");
        double s = 0.0;
        for (int k = lo; k < hi; ++k) s += X[edge_ids[k]];
        const double corr = (1.0 - s) / (hi - lo);
        for (int k = lo; k < hi; ++k) out[edge_ids[k]] += corr;
    }
    return t.add_node(std::move(out),
                      [x, offsets = std::move(offsets), edge_ids = std::move(edge_ids)](
                          Tape& tp, int self) {
                          const Tensor& g = tp.grad(self);
                          Tensor& gx = tp.grad(x);
                          for (std::size_t j = 0; j + 1 < offsets.size(); ++j) {
                              const int lo = offsets[j], hi = offsets[j + 1];
                              double gs = 0.0;
                              for (int k = lo; k < hi; ++k) gs += g[edge_ids[k]];
                              gs /= (hi - lo);
                              for (int k = lo; k < hi; ++k) gx[edge_ids[k]] += g[edge_ids[k]] - gs;
                          }
                      });
}

// Mean squared difference of two same-shape tensors, as a scalar node.
inline int mse(Tape& t, int a, int b) {
    const int d = sub(t, a, b);
    const int q = mul(t, d, d);
    const int s = sum_all(t, q);
    return scale(t, s, 1.0 / static_cast<double>(t.value(a).numel()));
}

// ---------------------------------------------------------------------------
// Adam with bias correction over an ordered list of parameter tensors.

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step_count = 0;
    std::vector<Tensor> m, v;

    void init(const std::vector<Tensor>& params) {
        m.clear();
        v.clear();
        for (const Tensor& p : params) {
            m.emplace_back(p.shape, 0.0);
            v.emplace_back(p.shape, 0.0);
        }
        step_count = 0;
    }
};

inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& st) {
    require(params.size() == grads.size(), "adam_step: size mismatch");
    if (st.m.size() != params.size()) st.init(params);
    ++st.step_count;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (std::size_t p = 0; p < params.size(); ++p) {
        require(params[p].same_shape(grads[p]), "adam_step: grad shape mismatch");
        for (std::size_t i = 0; i < params[p].numel(); ++i) {
            const double g = grads[p][i];
            double& mi = st.m[p][i];
            double& vi = st.v[p][i];
            mi = st.beta1 * mi + (1.0 - st.beta1) * g;
            vi = st.beta2 * vi + (1.0 - st.beta2) * g * g;
            params[p][i] -= st.lr * (mi / bc1) / (std::sqrt(vi / bc2) + st.eps);
        }
    }
}

} // namespace slgraph
