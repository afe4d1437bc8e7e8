#include "sgs/mlp.hpp"

namespace sgs {

Mlp Mlp::make(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) fail("InvalidMlp", "need at least input and output dims");
    Mlp mlp;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        double bound = std::sqrt(6.0 / fan_in);
        MatXR W(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) W(r, c) = rng.uniform(-bound, bound);
        mlp.weights.push_back(std::move(W));
        mlp.biases.push_back(VecX::Zero(fan_out));
    }
    return mlp;
}

void MlpGrads::init_like(const Mlp& mlp) {
    dweights.clear();
    dbiases.clear();
    for (size_t l = 0; l < mlp.n_layers(); ++l) {
        dweights.push_back(MatXR::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
        dbiases.push_back(VecX::Zero(mlp.biases[l].size()));
    }
    dskip_weight = 0.0;
}

void MlpGrads::add(const MlpGrads& other) {
    for (size_t l = 0; l < dweights.size(); ++l) {
        dweights[l] += other.dweights[l];
        dbiases[l] += other.dbiases[l];
    }
    dskip_weight += other.dskip_weight;
}

void MlpGrads::scale(double s) {
    for (size_t l = 0; l < dweights.size(); ++l) {
        dweights[l] *= s;
        dbiases[l] *= s;
    }
    dskip_weight *= s;
}

MatXR mlp_forward(const Mlp& mlp, const MatXR& x, MlpActivations* acts) {
    if (x.cols() != mlp.in_dim())
        fail("DimensionMismatch", "MLP input dim " + std::to_string(x.cols()) + " != " +
                                      std::to_string(mlp.in_dim()));
    if (acts) {
        acts->input = x;
        acts->hidden.clear();
    }
    MatXR h = x;
    const size_t L = mlp.n_layers();
    for (size_t l = 0; l + 1 < L; ++l) {
        h = (h * mlp.weights[l].transpose()).rowwise() + mlp.biases[l].transpose();
        h = h.cwiseMax(0.0);
        if (acts) acts->hidden.push_back(h);
    }
    MatXR pre = (h * mlp.weights[L - 1].transpose()).rowwise() + mlp.biases[L - 1].transpose();
    if (mlp.skip_input >= 0) {
        pre.col(0) += mlp.skip_weight * (x.col(mlp.skip_input).array() - 0.5).matrix();
    }
    MatXR y = pre.unaryExpr([](double v) { return sigmoid(v); });
    if (acts) acts->output = y;
    return y;
}

MatXR mlp_backward(const Mlp& mlp, const MlpActivations& acts, const MatXR& dy, MlpGrads& grads) {
    const size_t L = mlp.n_layers();
    // Sigmoid head: dpre = dy * y * (1 - y).
    MatXR delta =
        dy.cwiseProduct(acts.output.cwiseProduct((1.0 - acts.output.array()).matrix()));

    MatXR dx_skip;
    if (mlp.skip_input >= 0) {
        grads.dskip_weight +=
            (delta.col(0).array() * (acts.input.col(mlp.skip_input).array() - 0.5)).sum();
        dx_skip = delta.col(0) * mlp.skip_weight;
    }

    for (size_t l = L; l-- > 0;) {
        const MatXR& layer_in = l == 0 ? acts.input : acts.hidden[l - 1];
        grads.dweights[l] += delta.transpose() * layer_in;
        grads.dbiases[l] += delta.colwise().sum().transpose();
        MatXR dx = delta * mlp.weights[l];
        if (l > 0) {
            // ReLU mask from the saved post-activation.
            delta = dx.cwiseProduct(
                (acts.hidden[l - 1].array() > 0.0).cast<double>().matrix());
        } else {
            if (mlp.skip_input >= 0) dx.col(mlp.skip_input) += dx_skip;
            return dx;
        }
    }
    return {};
}

} // namespace sgs
