#include "sgs/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace sgs {

using nlohmann::json;

namespace {

double get_num(const json& j, const std::string& path, double fallback, double lo, double hi) {
    if (!j.contains(path)) return fallback;
    const auto& v = j.at(path);
    if (!v.is_number()) fail("ConfigError", path + ": expected a number");
    double x = v.get<double>();
    if (x < lo || x > hi)
        fail("ConfigError", path + ": value " + std::to_string(x) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

int get_int(const json& j, const std::string& path, int fallback, int lo, int hi) {
    if (!j.contains(path)) return fallback;
    const auto& v = j.at(path);
    if (!v.is_number_integer()) fail("ConfigError", path + ": expected an integer");
    int x = v.get<int>();
    if (x < lo || x > hi) fail("ConfigError", path + ": out of range");
    return x;
}

double get_lr(const json& j, const std::string& key, double fallback) {
    if (!j.contains("lr")) return fallback;
    if (!j.at("lr").is_object()) fail("ConfigError", "lr: expected an object");
    return get_num(j.at("lr"), key, fallback, 0.0, 1.0);
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail("ConfigError", std::string("invalid JSON: ") + e.what());
    }
    RunConfig cfg;

    if (j.contains("config_id")) {
        const auto& v = j.at("config_id");
        if (!v.is_string() || v.get<std::string>().size() != 1)
            fail("ConfigError", "config_id: expected one of \"a\", \"b\", \"c\", \"d\"");
        cfg.config_id = v.get<std::string>()[0];
    }
    if (cfg.config_id < 'a' || cfg.config_id > 'd')
        fail("ConfigError", std::string("config_id: unknown configuration \"") + cfg.config_id +
                                "\"");

    cfg.window_size = get_int(j, "window_size", cfg.window_size, 1, 1000);
    cfg.theta_view_deg = get_num(j, "theta_view_deg", cfg.theta_view_deg, 0.0, 180.0);
    cfg.lambda_ssim = get_num(j, "lambda_ssim", cfg.lambda_ssim, 0.0, 1.0);
    cfg.lambda_iso = get_num(j, "lambda_iso", cfg.lambda_iso, 0.0, 1e9);
    cfg.n_init = get_int(j, "n_init", cfg.n_init, 1, 10000000);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer()) fail("ConfigError", "seed: expected an integer");
        cfg.seed = j.at("seed").get<uint64_t>();
    }
    cfg.encoding_freqs = get_int(j, "encoding_freqs", cfg.encoding_freqs, 1, 16);

    cfg.lr_means = get_lr(j, "means", cfg.lr_means);
    cfg.lr_rotations = get_lr(j, "rotations", cfg.lr_rotations);
    cfg.lr_log_scales = get_lr(j, "log_scales", cfg.lr_log_scales);
    cfg.lr_opacity = get_lr(j, "opacity", cfg.lr_opacity);
    cfg.lr_features = get_lr(j, "features", cfg.lr_features);
    cfg.lr_latents = get_lr(j, "latents", cfg.lr_latents);
    cfg.lr_phi = get_lr(j, "phi", cfg.lr_phi);
    cfg.lr_psi = get_lr(j, "psi", cfg.lr_psi);
    cfg.lr_rgb = get_lr(j, "rgb", cfg.lr_rgb);

    if (j.contains("densify")) {
        const auto& d = j.at("densify");
        if (!d.is_object()) fail("ConfigError", "densify: expected an object");
        cfg.densify_interval_rounds =
            get_int(d, "interval_rounds", cfg.densify_interval_rounds, 1, 100000);
        cfg.tau_grad = get_num(d, "tau_grad", cfg.tau_grad, 0.0, 1.0);
        cfg.tau_small_frac = get_num(d, "tau_small_frac", cfg.tau_small_frac, 0.0, 1.0);
        cfg.tau_prune = get_num(d, "tau_prune", cfg.tau_prune, 0.0, 1.0);
        cfg.prune_radius_px_frac = get_num(d, "radius_px_frac", cfg.prune_radius_px_frac, 0.0, 10.0);
        cfg.prune_world_frac = get_num(d, "world_frac", cfg.prune_world_frac, 0.0, 10.0);
    }
    cfg.checkpoint_interval_rounds =
        get_int(j, "checkpoint_interval_rounds", cfg.checkpoint_interval_rounds, 0, 1000000);
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("ConfigError", "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
    json j;
    j["config_id"] = std::string(1, config_id);
    j["window_size"] = window_size;
    j["theta_view_deg"] = theta_view_deg;
    j["lambda_ssim"] = lambda_ssim;
    j["lambda_iso"] = lambda_iso;
    j["n_init"] = n_init;
    j["seed"] = seed;
    j["encoding_freqs"] = encoding_freqs;
    j["lr"] = {{"means", lr_means},     {"rotations", lr_rotations}, {"log_scales", lr_log_scales},
               {"opacity", lr_opacity}, {"features", lr_features},   {"latents", lr_latents},
               {"phi", lr_phi},         {"psi", lr_psi},             {"rgb", lr_rgb}};
    j["densify"] = {{"interval_rounds", densify_interval_rounds},
                    {"tau_grad", tau_grad},
                    {"tau_small_frac", tau_small_frac},
                    {"tau_prune", tau_prune},
                    {"radius_px_frac", prune_radius_px_frac},
                    {"world_frac", prune_world_frac}};
    j["checkpoint_interval_rounds"] = checkpoint_interval_rounds;
    return j.dump(2);
}

} // namespace sgs
