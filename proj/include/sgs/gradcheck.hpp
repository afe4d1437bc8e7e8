#pragma once

#include <string>
#include <vector>

namespace sgs {

struct GradSuiteResult {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;
    bool pass = false;
};

// Finite-difference validation of every analytic gradient path: projection
// Jacobian, splat covariance, rasterizer backward, appearance and shadow
// MLPs, loss terms, and the shadow multiply. `corrupt` injects a deliberate
// error into one suite (negative control for the harness itself).
std::vector<GradSuiteResult> run_gradcheck(uint64_t seed, bool corrupt = false);

} // namespace sgs
