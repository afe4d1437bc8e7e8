#include "sgs/appearance.hpp"

#include "sgs/parallel.hpp"

namespace sgs {

void positional_encode(double p, int L, double* out) {
    double arg = M_PI * p;
    for (int l = 0; l < L; ++l) {
        out[2 * l] = std::sin(arg);
        out[2 * l + 1] = std::cos(arg);
        arg *= 2.0;
    }
}

Mlp make_phi(int L, Rng& rng) {
    Mlp phi = Mlp::make({phi_input_dim(L), 256, 256, 256, 3}, rng);
    if (phi.in_dim() != kFeatureDim + 12 * L) fail("InvalidMlp", "Phi input dim bookkeeping");
    return phi;
}

Mlp make_psi(int L, Rng& rng) {
    Mlp psi = Mlp::make({psi_input_dim(L), 32, 32, 32, 1}, rng);
    if (psi.in_dim() != 1 + 12 * L + kLatentDim) fail("InvalidMlp", "Psi input dim bookkeeping");
    psi.weights.back().setZero();
    psi.biases.back().setZero();
    psi.skip_input = 0;
    psi.skip_weight = 4.0;
    return psi;
}

std::vector<Vec3> view_directions(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                                  const Vec3& cam_center_obj) {
    std::vector<Vec3> dirs(cloud_index.size());
    for (size_t i = 0; i < cloud_index.size(); ++i) {
        Vec3 d = cam_center_obj - cloud.means[cloud_index[i]];
        double n = d.norm();
        dirs[i] = n > 1e-12 ? Vec3(d / n) : Vec3(0, 0, 1);
    }
    return dirs;
}

MatXR build_phi_input(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                      const Vec3& sun_obj, const std::vector<Vec3>& view_dirs, int L) {
    const int enc = 6 * L;
    MatXR x(long(cloud_index.size()), phi_input_dim(L));
    VecX sun_enc = positional_encode_vec(sun_obj, L);
    for (size_t i = 0; i < cloud_index.size(); ++i) {
        x.block(long(i), 0, 1, kFeatureDim) = cloud.features[cloud_index[i]].transpose();
        x.block(long(i), kFeatureDim, 1, enc) = sun_enc.transpose();
        x.block(long(i), kFeatureDim + enc, 1, enc) =
            positional_encode_vec(view_dirs[i], L).transpose();
    }
    return x;
}

MatXR build_psi_input(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                      const std::vector<double>& visibility, const Vec3& sun_obj,
                      double scene_radius, int L) {
    if (visibility.size() != cloud_index.size()) fail("DimensionMismatch", "visibility size");
    const int enc = 6 * L;
    MatXR x(long(cloud_index.size()), psi_input_dim(L));
    VecX sun_enc = positional_encode_vec(sun_obj, L);
    const double r = scene_radius > 0 ? scene_radius : 1.0;
    for (size_t i = 0; i < cloud_index.size(); ++i) {
        const int g = cloud_index[i];
        x(long(i), 0) = visibility[i];
        x.block(long(i), 1, 1, enc) = sun_enc.transpose();
        x.block(long(i), 1 + enc, 1, enc) =
            positional_encode_vec(cloud.means[g] / r, L).transpose();
        x.block(long(i), 1 + 2 * enc, 1, kLatentDim) = cloud.latents[g].transpose();
    }
    return x;
}

void ChunkedMlpPass::forward(const Mlp& m, const MatXR& x) {
    mlp = &m;
    const int64_t n = x.rows();
    const int64_t n_chunks = std::max<int64_t>(1, (n + chunk_rows - 1) / chunk_rows);
    acts.assign(size_t(n_chunks), {});
    output.resize(n, m.out_dim());
    parallel_for(n, chunk_rows, [&](int64_t begin, int64_t end) {
        const size_t chunk = size_t(begin / chunk_rows);
        MatXR block = x.middleRows(begin, end - begin);
        output.middleRows(begin, end - begin) = mlp_forward(m, block, &acts[chunk]);
    });
}

MatXR ChunkedMlpPass::backward(const MatXR& dy, MlpGrads& grads) const {
    const int64_t n = dy.rows();
    MatXR dx(n, mlp->in_dim());
    std::vector<MlpGrads> partial(acts.size());
    parallel_for(n, chunk_rows, [&](int64_t begin, int64_t end) {
        const size_t chunk = size_t(begin / chunk_rows);
        partial[chunk].init_like(*mlp);
        dx.middleRows(begin, end - begin) =
            mlp_backward(*mlp, acts[chunk], dy.middleRows(begin, end - begin), partial[chunk]);
    });
    for (const auto& p : partial) grads.add(p);
    return dx;
}

} // namespace sgs
