#pragma once

#include "sgs/image.hpp"
#include "sgs/mesh.hpp"

#include <string>
#include <vector>

namespace sgs {

inline constexpr double kAmbientFloor = 0.05;

/// Lambertian render with hard sun shadows: albedo * max(0, n.s) * (1 if lit
/// else ambient) + ambient * albedo, black background, 8-bit quantized.
/// The mask is 1 exactly on primary-ray hits.
void raytrace_frame(const TargetMesh& mesh, const RigidTransform& obj2cam, const Pinhole& K,
                    const Vec3& sun_obj, Image& rgb, Image& mask);

struct TrajectoryConfig {
    double orbit_ax = 6.0;     // r(t) = (ax cos wt, ay sin 2wt + y0, az sin wt)
    double orbit_ay = 1.5;
    double orbit_az = 6.0;
    double orbit_y0 = 0.0;
    double period_s = 600.0;
    double tumble_deg_per_s = 2.0; // about the target's x axis
    double frame_interval_s = 5.0;
    int n_frames = 360;
    int n_holdout = 40; // sequential tail, excluded from training
    int n_eval = 20;    // random-pose split
    Vec3 sun_inertial = Vec3(1.0, 0.35, 0.2).normalized();
    Pinhole intrinsics{160.0, 160.0, 64.0, 64.0, 128, 128};

    static TrajectoryConfig from_json_text(const std::string& text);
    static TrajectoryConfig from_file(const std::string& path);
};

struct FrameRecord {
    int id = 0;
    std::string image, mask;
    Quat q_obj2cam;
    Vec3 t_obj2cam = Vec3::Zero();
    Vec3 sun_obj = Vec3::UnitX();
};

struct Manifest {
    Pinhole intrinsics;
    std::vector<FrameRecord> frames;
    int holdout_start = -1; // frames with id >= this are the sequential holdout

    std::string to_json() const;
    static Manifest from_json(const std::string& text);
};

/// Pose + object-frame sun for the sequential trajectory at frame index i.
void sequence_frame(const TrajectoryConfig& cfg, int i, RigidTransform& obj2cam, Vec3& sun_obj);

// Writes manifest.json, images/%06d.png, masks/%06d.png for the sequential
// frames (train + holdout tail) and an eval/ subdirectory with the same layout
// for the random-pose split. Byte-identical for a fixed seed.
void generate_dataset(const TargetMesh& mesh, const TrajectoryConfig& cfg,
                      const std::string& out_dir, uint64_t seed);

Manifest load_manifest(const std::string& dataset_dir);

/// Camera look-at: object->camera transform for a camera at `center` looking
/// at the origin; `roll` spins about the boresight.
RigidTransform look_at_origin(const Vec3& center, const Vec3& up_hint, double roll = 0.0);

} // namespace sgs
