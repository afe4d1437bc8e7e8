#pragma once

#include "sgs/common.hpp"
#include "sgs/rng.hpp"

#include <vector>

namespace sgs {

// Affine + ReLU stack with a sigmoid head, evaluated on row batches.
// The optional input skip feeds weight * (x[skip_input] - 0.5) straight into
// the pre-sigmoid output; the shadow MLP uses it so raw visibility survives
// initialization.
struct Mlp {
    std::vector<MatXR> weights; // out x in
    std::vector<VecX> biases;
    int skip_input = -1;
    double skip_weight = 0.0;

    int in_dim() const { return int(weights.front().cols()); }
    int out_dim() const { return int(weights.back().rows()); }
    size_t n_layers() const { return weights.size(); }

    /// Kaiming-uniform fan-in weights, zero biases.
    static Mlp make(const std::vector<int>& dims, Rng& rng);
};

struct MlpActivations {
    MatXR input;
    std::vector<MatXR> hidden; // post-ReLU per hidden layer
    MatXR output;              // post-sigmoid
};

struct MlpGrads {
    std::vector<MatXR> dweights;
    std::vector<VecX> dbiases;
    double dskip_weight = 0.0;

    void init_like(const Mlp& mlp);
    void add(const MlpGrads& other);
    void scale(double s);
};

/// Batch forward; saves intermediates in `acts` when non-null.
MatXR mlp_forward(const Mlp& mlp, const MatXR& x, MlpActivations* acts = nullptr);

/// Reverse-mode pass. Returns dL/dx; accumulates parameter grads into `grads`.
MatXR mlp_backward(const Mlp& mlp, const MlpActivations& acts, const MatXR& dy, MlpGrads& grads);

} // namespace sgs
