#include "sgs/checkpoint.hpp"

#include "sgs/appearance.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace sgs {

using nlohmann::json;

namespace {

void put_bytes(std::ofstream& out, const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n));
}

void put_u32(std::ofstream& out, uint32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::ofstream& out, uint64_t v) { put_bytes(out, &v, 8); }

void put_f32_array(std::ofstream& out, const double* src, size_t n) {
    std::vector<float> buf(n);
    for (size_t i = 0; i < n; ++i) buf[i] = float(src[i]);
    put_bytes(out, buf.data(), 4 * n);
}

void get_bytes(std::ifstream& in, void* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), std::streamsize(n));
    if (!in) fail("IoError", "truncated checkpoint");
}

uint32_t get_u32(std::ifstream& in) {
    uint32_t v;
    get_bytes(in, &v, 4);
    return v;
}

uint64_t get_u64(std::ifstream& in) {
    uint64_t v;
    get_bytes(in, &v, 8);
    return v;
}

void get_f32_array(std::ifstream& in, double* dst, size_t n) {
    std::vector<float> buf(n);
    get_bytes(in, buf.data(), 4 * n);
    for (size_t i = 0; i < n; ++i) dst[i] = double(buf[i]);
}

// Tensor blob: u32 count, then per tensor {u32 rows, u32 cols, f32 data}.
// Order: W0, b0, W1, b1, ...[, skip scalar as 1x1].
void put_mlp(std::ofstream& out, const Mlp& mlp) {
    const bool has_skip = mlp.skip_input >= 0;
    put_u32(out, uint32_t(2 * mlp.n_layers() + (has_skip ? 1 : 0)));
    for (size_t l = 0; l < mlp.n_layers(); ++l) {
        put_u32(out, uint32_t(mlp.weights[l].rows()));
        put_u32(out, uint32_t(mlp.weights[l].cols()));
        put_f32_array(out, mlp.weights[l].data(), size_t(mlp.weights[l].size()));
        put_u32(out, uint32_t(mlp.biases[l].size()));
        put_u32(out, 1);
        put_f32_array(out, mlp.biases[l].data(), size_t(mlp.biases[l].size()));
    }
    if (has_skip) {
        put_u32(out, 1);
        put_u32(out, 1);
        put_f32_array(out, &mlp.skip_weight, 1);
    }
}

// Shapes come from the stored table, so the loader never guesses sizes.
Mlp read_mlp(std::ifstream& in, bool has_skip) {
    uint32_t n_tensors = get_u32(in);
    uint32_t n_layer_tensors = has_skip ? n_tensors - 1 : n_tensors;
    if ((has_skip && n_tensors < 3) || n_layer_tensors % 2 != 0)
        fail("VersionMismatch", "bad MLP tensor count");
    Mlp mlp;
    for (uint32_t l = 0; l < n_layer_tensors / 2; ++l) {
        uint32_t r = get_u32(in), c = get_u32(in);
        MatXR W(r, c);
        get_f32_array(in, W.data(), size_t(r) * c);
        mlp.weights.push_back(std::move(W));
        uint32_t br = get_u32(in), bc = get_u32(in);
        if (bc != 1 || br != r) fail("VersionMismatch", "MLP bias shape mismatch");
        VecX b(br);
        get_f32_array(in, b.data(), br);
        mlp.biases.push_back(std::move(b));
    }
    if (has_skip) {
        uint32_t r = get_u32(in), c = get_u32(in);
        if (r != 1 || c != 1) fail("VersionMismatch", "skip scalar shape mismatch");
        get_f32_array(in, &mlp.skip_weight, 1);
        mlp.skip_input = 0;
    }
    return mlp;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    const GaussianCloud& cl = ckpt.cloud;
    const uint64_t n = cl.size();

    out.write("SGSC", 4);
    uint32_t version = kCheckpointVersion;
    put_u32(out, version);
    put_u64(out, n);

    std::vector<double> tmp;
    tmp.reserve(n * kFeatureDim);

    tmp.clear();
    for (const auto& v : cl.means) tmp.insert(tmp.end(), v.data(), v.data() + 3);
    put_f32_array(out, tmp.data(), tmp.size());
    tmp.clear();
    for (const auto& v : cl.log_scales) tmp.insert(tmp.end(), v.data(), v.data() + 3);
    put_f32_array(out, tmp.data(), tmp.size());
    tmp.clear();
    for (const auto& q : cl.rotations) {
        tmp.push_back(q.w);
        tmp.push_back(q.x);
        tmp.push_back(q.y);
        tmp.push_back(q.z);
    }
    put_f32_array(out, tmp.data(), tmp.size());
    put_f32_array(out, cl.opacity_logits.data(), n);

    // Features; in the direct-color configuration the RGB logits ride in the
    // first three floats.
    tmp.clear();
    for (size_t i = 0; i < n; ++i) {
        Feature f = cl.features[i];
        if (!ckpt.config.use_appearance_mlp()) {
            f[0] = cl.rgb_logits[i][0];
            f[1] = cl.rgb_logits[i][1];
            f[2] = cl.rgb_logits[i][2];
        }
        tmp.insert(tmp.end(), f.data(), f.data() + kFeatureDim);
    }
    put_f32_array(out, tmp.data(), tmp.size());
    tmp.clear();
    for (const auto& l : cl.latents) tmp.insert(tmp.end(), l.data(), l.data() + kLatentDim);
    put_f32_array(out, tmp.data(), tmp.size());

    put_mlp(out, ckpt.phi);
    put_mlp(out, ckpt.psi);

    json meta;
    meta["run_config"] = json::parse(ckpt.config.to_json_text());
    meta["rounds_done"] = ckpt.rounds_done;
    meta["frames_consumed"] = ckpt.frames_consumed;
    meta["final_window_ids"] = ckpt.final_window_ids;
    meta["scene_radius"] = ckpt.scene_radius;
    const std::string blob = meta.dump();
    put_u64(out, blob.size());
    put_bytes(out, blob.data(), blob.size());
    if (!out) fail("IoError", "short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, "SGSC", 4) != 0) fail("VersionMismatch", "bad checkpoint magic");
    uint32_t version = get_u32(in);
    if (version != kCheckpointVersion)
        fail("VersionMismatch", "unsupported checkpoint version " + std::to_string(version));
    const uint64_t n = get_u64(in);

    Checkpoint ckpt;
    GaussianCloud& cl = ckpt.cloud;
    cl.means.assign(n, Vec3::Zero());
    cl.log_scales.assign(n, Vec3::Zero());
    cl.rotations.assign(n, Quat{});
    cl.opacity_logits.assign(n, 0.0);
    cl.features.assign(n, Feature::Zero());
    cl.latents.assign(n, Latent::Zero());
    cl.rgb_logits.assign(n, Vec3::Zero());

    std::vector<double> tmp(n * kFeatureDim);
    get_f32_array(in, tmp.data(), n * 3);
    for (size_t i = 0; i < n; ++i) cl.means[i] = Vec3(tmp[3 * i], tmp[3 * i + 1], tmp[3 * i + 2]);
    get_f32_array(in, tmp.data(), n * 3);
    for (size_t i = 0; i < n; ++i)
        cl.log_scales[i] = Vec3(tmp[3 * i], tmp[3 * i + 1], tmp[3 * i + 2]);
    get_f32_array(in, tmp.data(), n * 4);
    for (size_t i = 0; i < n; ++i)
        cl.rotations[i] =
            Quat{tmp[4 * i], tmp[4 * i + 1], tmp[4 * i + 2], tmp[4 * i + 3]}.normalized();
    get_f32_array(in, cl.opacity_logits.data(), n);
    get_f32_array(in, tmp.data(), n * kFeatureDim);
    for (size_t i = 0; i < n; ++i)
        for (int k = 0; k < kFeatureDim; ++k) cl.features[i][k] = tmp[i * kFeatureDim + k];
    get_f32_array(in, tmp.data(), n * kLatentDim);
    for (size_t i = 0; i < n; ++i)
        for (int k = 0; k < kLatentDim; ++k) cl.latents[i][k] = tmp[i * kLatentDim + k];

    ckpt.phi = read_mlp(in, false);
    ckpt.psi = read_mlp(in, true);

    uint64_t blob_len = get_u64(in);
    std::string blob(blob_len, '\0');
    get_bytes(in, blob.data(), blob_len);
    json meta = json::parse(blob);
    ckpt.config = RunConfig::from_json_text(meta.at("run_config").dump());
    ckpt.rounds_done = meta.at("rounds_done");
    ckpt.frames_consumed = meta.at("frames_consumed");
    ckpt.final_window_ids = meta.at("final_window_ids").get<std::vector<int>>();
    ckpt.scene_radius = meta.at("scene_radius");

    const int L = ckpt.config.encoding_freqs;
    if (ckpt.phi.in_dim() != phi_input_dim(L) || ckpt.psi.in_dim() != psi_input_dim(L))
        fail("VersionMismatch", "MLP shapes do not match the stored run config");

    if (!ckpt.config.use_appearance_mlp()) {
        for (size_t i = 0; i < n; ++i) {
            cl.rgb_logits[i] = Vec3(cl.features[i][0], cl.features[i][1], cl.features[i][2]);
        }
    }
    return ckpt;
}

} // namespace sgs
