#include "sgs/datagen.hpp"

#include "sgs/parallel.hpp"
#include "sgs/png_io.hpp"
#include "sgs/rng.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace sgs {

using nlohmann::json;

void raytrace_frame(const TargetMesh& mesh, const RigidTransform& obj2cam, const Pinhole& K,
                    const Vec3& sun_obj, Image& rgb, Image& mask) {
    rgb = Image(K.height, K.width, 3);
    mask = Image(K.height, K.width, 1);
    const RigidTransform cam2obj = obj2cam.inverse();
    const Mat3 R_c2o = quat_to_rotmat(cam2obj.rotation);
    const Vec3 origin = cam2obj.translation; // camera center, object frame
    const Vec3 sun = sun_obj.normalized();
    const double shadow_eps = 1e-5;

    parallel_for(K.height, 8, [&](int64_t y0, int64_t y1) {
        for (int64_t y = y0; y < y1; ++y) {
            for (int x = 0; x < K.width; ++x) {
                Vec3 dir_cam((x + 0.5 - K.cx) / K.fx, (y + 0.5 - K.cy) / K.fy, 1.0);
                Vec3 dir = (R_c2o * dir_cam).normalized();
                RayHit hit = intersect_mesh(mesh, origin, dir);
                if (!hit.hit()) continue;
                const Triangle& tri = mesh.triangles[hit.triangle];
                Vec3 p = origin + hit.t * dir;
                double lambert = std::max(0.0, tri.normal().dot(sun));
                double direct = lambert;
                if (lambert > 0.0 && any_intersection(mesh, p, sun, shadow_eps))
                    direct = lambert * kAmbientFloor;
                for (int c = 0; c < 3; ++c) {
                    double v = tri.albedo[c] * (direct + kAmbientFloor);
                    rgb.at(int(y), x, c) = to_u8(v) / 255.0;
                }
                mask.at(int(y), x, 0) = 1.0;
            }
        }
    });
}

RigidTransform look_at_origin(const Vec3& center, const Vec3& up_hint, double roll) {
    Vec3 z_cam = (-center).normalized();
    Vec3 up = up_hint;
    if (std::abs(up.normalized().dot(z_cam)) > 0.999) up = Vec3(1, 0, 0); // degenerate hint
    if (roll != 0.0) {
        // Spin the up hint about the boresight.
        Mat3 R = quat_to_rotmat(Quat::from_axis_angle(z_cam, roll));
        up = R * up;
    }
    Vec3 x_cam = up.cross(z_cam).normalized();
    Vec3 y_cam = z_cam.cross(x_cam);
    Mat3 R;
    R.row(0) = x_cam;
    R.row(1) = y_cam;
    R.row(2) = z_cam;
    Quat q = quat_from_rotmat(R);
    return {q, -(quat_to_rotmat(q) * center)};
}

void sequence_frame(const TrajectoryConfig& cfg, int i, RigidTransform& obj2cam, Vec3& sun_obj) {
    const double t = i * cfg.frame_interval_s;
    const double wt = 2.0 * M_PI * t / cfg.period_s;
    // World-frame camera position on the relative orbit.
    Vec3 cam_w(cfg.orbit_ax * std::cos(wt), cfg.orbit_ay * std::sin(2 * wt) + cfg.orbit_y0,
               cfg.orbit_az * std::sin(wt));

    // Target tumbles about its x axis; object->world attitude.
    const double theta = cfg.tumble_deg_per_s * M_PI / 180.0 * t;
    Quat q_o2w = Quat::from_axis_angle(Vec3::UnitX(), theta);
    Mat3 R_o2w = quat_to_rotmat(q_o2w);

    RigidTransform world2cam = look_at_origin(cam_w, Vec3::UnitY());
    obj2cam.rotation = (world2cam.rotation * q_o2w).normalized();
    obj2cam.translation = world2cam.translation; // object sits at the world origin

    sun_obj = R_o2w.transpose() * cfg.sun_inertial.normalized();
}

TrajectoryConfig TrajectoryConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail("ConfigError", std::string("invalid JSON: ") + e.what());
    }
    TrajectoryConfig cfg;
    auto num = [&](const char* key, double fallback) {
        if (!j.contains(key)) return fallback;
        if (!j.at(key).is_number()) fail("ConfigError", std::string(key) + ": expected a number");
        return j.at(key).get<double>();
    };
    cfg.orbit_ax = num("orbit_ax", cfg.orbit_ax);
    cfg.orbit_ay = num("orbit_ay", cfg.orbit_ay);
    cfg.orbit_az = num("orbit_az", cfg.orbit_az);
    cfg.orbit_y0 = num("orbit_y0", cfg.orbit_y0);
    cfg.period_s = num("period_s", cfg.period_s);
    cfg.tumble_deg_per_s = num("tumble_deg_per_s", cfg.tumble_deg_per_s);
    cfg.frame_interval_s = num("frame_interval_s", cfg.frame_interval_s);
    cfg.n_frames = int(num("n_frames", cfg.n_frames));
    cfg.n_holdout = int(num("n_holdout", cfg.n_holdout));
    cfg.n_eval = int(num("n_eval", cfg.n_eval));
    if (cfg.n_frames < 1 || cfg.n_holdout < 0 || cfg.n_eval < 0)
        fail("ConfigError", "n_frames/n_holdout/n_eval: out of range");
    if (j.contains("sun_inertial")) {
        auto s = j.at("sun_inertial");
        if (!s.is_array() || s.size() != 3) fail("ConfigError", "sun_inertial: expected [x, y, z]");
        cfg.sun_inertial = Vec3(s[0], s[1], s[2]).normalized();
    }
    if (j.contains("intrinsics")) {
        const auto& in = j.at("intrinsics");
        cfg.intrinsics = {in.value("fx", cfg.intrinsics.fx),
                          in.value("fy", cfg.intrinsics.fy),
                          in.value("cx", cfg.intrinsics.cx),
                          in.value("cy", cfg.intrinsics.cy),
                          in.value("width", cfg.intrinsics.width),
                          in.value("height", cfg.intrinsics.height)};
        cfg.intrinsics.validate();
    }
    return cfg;
}

TrajectoryConfig TrajectoryConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("ConfigError", "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string Manifest::to_json() const {
    json j;
    j["intrinsics"] = {{"fx", intrinsics.fx}, {"fy", intrinsics.fy}, {"cx", intrinsics.cx},
                       {"cy", intrinsics.cy}, {"width", intrinsics.width},
                       {"height", intrinsics.height}};
    j["holdout_start"] = holdout_start;
    j["frames"] = json::array();
    for (const auto& f : frames) {
        j["frames"].push_back({{"id", f.id},
                               {"image", f.image},
                               {"mask", f.mask},
                               {"q_obj2cam", {f.q_obj2cam.w, f.q_obj2cam.x, f.q_obj2cam.y,
                                              f.q_obj2cam.z}},
                               {"t_obj2cam", {f.t_obj2cam.x(), f.t_obj2cam.y(), f.t_obj2cam.z()}},
                               {"sun_obj", {f.sun_obj.x(), f.sun_obj.y(), f.sun_obj.z()}}});
    }
    return j.dump(2);
}

Manifest Manifest::from_json(const std::string& text) {
    json j = json::parse(text);
    Manifest m;
    const auto& in = j.at("intrinsics");
    m.intrinsics = {in.at("fx"), in.at("fy"), in.at("cx"),
                    in.at("cy"), in.at("width"), in.at("height")};
    m.intrinsics.validate();
    m.holdout_start = j.value("holdout_start", -1);
    for (const auto& f : j.at("frames")) {
        FrameRecord r;
        r.id = f.at("id");
        r.image = f.at("image");
        r.mask = f.at("mask");
        auto q = f.at("q_obj2cam");
        r.q_obj2cam = Quat{q[0], q[1], q[2], q[3]}.normalized();
        auto t = f.at("t_obj2cam");
        r.t_obj2cam = Vec3(t[0], t[1], t[2]);
        auto s = f.at("sun_obj");
        r.sun_obj = Vec3(s[0], s[1], s[2]).normalized();
        m.frames.push_back(r);
    }
    return m;
}

namespace {

FrameRecord write_frame(const TargetMesh& mesh, const Pinhole& K, const RigidTransform& pose,
                        const Vec3& sun_obj, int id, const std::filesystem::path& dir) {
    Image rgb, mask;
    raytrace_frame(mesh, pose, K, sun_obj, rgb, mask);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", id);
    FrameRecord rec;
    rec.id = id;
    rec.image = std::string("images/") + name;
    rec.mask = std::string("masks/") + name;
    rec.q_obj2cam = pose.rotation;
    rec.t_obj2cam = pose.translation;
    rec.sun_obj = sun_obj;
    write_png((dir / rec.image).string(), rgb);
    write_png((dir / rec.mask).string(), mask);
    return rec;
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write " + path.string());
    out << m.to_json() << "\n";
}

} // namespace

void generate_dataset(const TargetMesh& mesh, const TrajectoryConfig& cfg,
                      const std::string& out_dir, uint64_t seed) {
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    fs::create_directories(root / "masks", ec);
    fs::create_directories(root / "eval" / "images", ec);
    fs::create_directories(root / "eval" / "masks", ec);
    if (!fs::exists(root / "images")) fail("IoError", "cannot create " + out_dir);

    cfg.intrinsics.validate();

    Manifest seq;
    seq.intrinsics = cfg.intrinsics;
    seq.holdout_start = cfg.n_frames;
    const int total = cfg.n_frames + cfg.n_holdout;
    for (int i = 0; i < total; ++i) {
        RigidTransform pose;
        Vec3 sun;
        sequence_frame(cfg, i, pose, sun);
        seq.frames.push_back(write_frame(mesh, cfg.intrinsics, pose, sun, i, root));
    }
    write_manifest(seq, root / "manifest.json");

    // Random-pose split: camera on a [4, 12] m sphere with random roll, sun
    // uniform, rejecting near-opposed sun/camera (target fully backlit).
    Rng rng = Rng::stream(seed, 7001);
    Manifest ev;
    ev.intrinsics = cfg.intrinsics;
    ev.holdout_start = -1;
    const double cos170 = std::cos(170.0 * M_PI / 180.0);
    for (int i = 0; i < cfg.n_eval; ++i) {
        Vec3 dir = rng.unit_vector();
        double radius = rng.uniform(4.0, 12.0);
        double roll = rng.uniform(0.0, 2.0 * M_PI);
        Vec3 sun = rng.unit_vector();
        while (sun.dot(dir) < cos170) sun = rng.unit_vector();
        RigidTransform pose = look_at_origin(radius * dir, Vec3::UnitY(), roll);
        ev.frames.push_back(write_frame(mesh, cfg.intrinsics, pose, sun, i, root / "eval"));
    }
    write_manifest(ev, root / "eval" / "manifest.json");
}

Manifest load_manifest(const std::string& dataset_dir) {
    std::ifstream in(std::filesystem::path(dataset_dir) / "manifest.json");
    if (!in) fail("IoError", "missing manifest.json in " + dataset_dir);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Manifest::from_json(text);
}

} // namespace sgs
