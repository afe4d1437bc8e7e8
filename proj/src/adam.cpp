#include "sgs/adam.hpp"

#include <cmath>

namespace sgs {

void AdamState::remap(const std::vector<int>& source, size_t stride) {
    std::vector<double> nm(source.size() * stride, 0.0), nv(source.size() * stride, 0.0);
    for (size_t i = 0; i < source.size(); ++i) {
        if (source[i] < 0) continue;
        for (size_t k = 0; k < stride; ++k) {
            nm[i * stride + k] = m[size_t(source[i]) * stride + k];
            nv[i * stride + k] = v[size_t(source[i]) * stride + k];
        }
    }
    m = std::move(nm);
    v = std::move(nv);
}

void adam_step(double* params, const double* grads, AdamState& state, size_t n, double lr) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, double(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, double(state.t));
    for (size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
        state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

} // namespace sgs
