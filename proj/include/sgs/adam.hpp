#pragma once

#include <cstdint>
#include <vector>

namespace sgs {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-15;

/// First/second moment buffers for one parameter group.
struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;

    void resize(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }

    /// Remap per-Gaussian moment slices after densify/prune. `stride` is the
    /// number of scalars per Gaussian; source -1 zeroes the slice (splits).
    void remap(const std::vector<int>& source, size_t stride);
};

void adam_step(double* params, const double* grads, AdamState& state, size_t n, double lr);

} // namespace sgs
