// Dense float64 tensor of up to 4 axes, the value type of the autodiff tape.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "slgraph/grid.hpp"

namespace slgraph {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, double fill = 0.0) : shape(std::move(shape_)) {
        if (shape.empty() || shape.size() > 4)
            throw std::invalid_argument("Tensor: rank must be 1..4");
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive extent");
            n *= static_cast<std::size_t>(d);
        }
        data.assign(n, fill);
    }

    static Tensor from_field(const Field& f) {
        Tensor t({static_cast<int>(f.size())});
        t.data = f.values;
        return t;
    }

    Field to_field() const {
        Field f(data.size());
        f.values = data;
        return f;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }

    // Leading extent and the product of the remaining extents; most ops treat
    // a tensor as [rows, row_width].
    int rows() const { return shape[0]; }
    int row_width() const {
        int w = 1;
        for (std::size_t k = 1; k < shape.size(); ++k) w *= shape[k];
        return w;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

} // namespace slgraph
